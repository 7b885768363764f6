"""
Seeded bootstrap runner shared by the characterization fits

Each sample gets its own Philox generator spawned from one SeedSequence, so
results depend only on the seed, never on worker count or scheduling.
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

DEFAULT_BOOTSTRAP_SAMPLES = 500


def spawn_generators(seed: Optional[int], count: int) -> List[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _safe_call(refit: Callable[[np.random.Generator], float], rng: np.random.Generator) -> float:
    try:
        value = refit(rng)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        logger.debug(f"[Bootstrap] Sample dropped: {exc}")
        return float("nan")
    return float(value)


def bootstrap(
    refit: Callable[[np.random.Generator], float],
    n_samples: int = DEFAULT_BOOTSTRAP_SAMPLES,
    seed: Optional[int] = None,
    n_jobs: int = 1,
) -> np.ndarray:
    """
    Run `refit` once per sample with an independent generator

    Returns:
        Finite sample values (failed refits are dropped)
    """
    if n_samples <= 0:
        return np.zeros(0)
    generators = spawn_generators(seed, n_samples)
    if n_jobs == 1:
        values = [_safe_call(refit, rng) for rng in generators]
    else:
        values = Parallel(n_jobs=n_jobs)(delayed(_safe_call)(refit, rng) for rng in generators)
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size < values.size:
        logger.warning(f"[Bootstrap] {values.size - finite.size} of {values.size} refits failed")
    return finite


def bootstrap_sigma(values: np.ndarray) -> float:
    """Sample standard deviation, 0 for fewer than two values"""
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0
