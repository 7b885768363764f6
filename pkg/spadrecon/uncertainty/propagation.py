"""
Monte Carlo propagation of sampling and detector-parameter uncertainty

Each sample resamples the click counts as independent Poissonians, draws the
uncertain parameters from independent Gaussians, rebuilds L, B and A around
a fixed recovery matrix and reruns EME. R never varies: every sample uses the
same bins, so it contributes nothing.

Runs:
    full       all parameter sigmas plus count resampling
    sampling   count resampling only
    <source>   one parameter varied, everything else fixed
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from spadrecon.core.distributions import NumberDistribution, normalize
from spadrecon.core.profiles import PhotonProfile
from spadrecon.core.schemas import DetectorParams
from spadrecon.detmat.composition import compose
from spadrecon.detmat.factors import (
    afterpulse_window_probability,
    build_afterpulse_matrix,
    build_background_matrix,
    build_loss_matrix,
)
from spadrecon.eme.reconstruction import eme_reconstruct
from spadrecon.eme.schemas import EmeConfig
from spadrecon.errors import InputError, SpadReconError, TooManyDroppedSamplesError
from spadrecon.recovery.matrix import RecoveryMatrix, build_recovery_matrix
from spadrecon.uncertainty.schemas import SOURCES, UncertaintyReport
from spadrecon.utils.run_tracker import track_stage

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

logger = logging.getLogger(__name__)

DEFAULT_MC_SAMPLES = 1000
MAX_DROPPED_FRACTION = 0.10


@dataclass
class _Sample:
    distribution: np.ndarray
    g2: Optional[float]
    nbar_fit: float


@dataclass(frozen=True)
class _Model:
    """Fixed inputs shared by every sample"""
    profile: PhotonProfile
    recovery: np.ndarray
    params: DetectorParams
    n_max: int
    ap_order: int
    cfg: EmeConfig


def _draw(rng: np.random.Generator, value: float, sigma: float, low: float, high: float) -> float:
    if sigma <= 0:
        return value
    return float(np.clip(rng.normal(value, sigma), low, high))


def _run_sample(model: _Model, probs: np.ndarray, counts_total: float, resample: bool,
                varied: Sequence[str], rng: np.random.Generator) -> Optional[_Sample]:
    params = model.params
    try:
        if resample:
            clicks = normalize(rng.poisson(probs * counts_total).astype(float))
        else:
            clicks = NumberDistribution(probs)
        eta0 = _draw(rng, params.eta0, params.eta0_sigma, 0.0, 1.0) if "eta0" in varied else params.eta0
        r_b = _draw(rng, params.r_b, params.r_b_sigma, 0.0, np.inf) if "r_b" in varied else params.r_b
        sampled = params
        if "ap_total" in varied:
            sampled = params.with_ap_total(_draw(rng, params.ap_total, params.ap_total_sigma, 0.0, 0.999))
        p_a = afterpulse_window_probability(model.profile, sampled.ap_profile_array(), sampled.ap_bin_width)

        matrix = compose(
            build_afterpulse_matrix(p_a, model.n_max, model.ap_order),
            model.recovery,
            build_background_matrix(r_b * model.profile.duration, model.n_max),
            build_loss_matrix(eta0, model.n_max),
        )
        result = eme_reconstruct(clicks, matrix, model.cfg)
    except (SpadReconError, FloatingPointError) as exc:
        logger.debug(f"[Uncertainty] Sample failed: {exc}")
        return None
    if not result.converged or result.singular_rows:
        return None
    return _Sample(np.asarray(result.distribution), result.g2_recon, result.fitted_nbar)


def _run(model: _Model, probs, counts_total, resample, varied, seed: np.random.SeedSequence,
         mc_samples: int, label: str, n_jobs: int, progress: bool) -> List[_Sample]:
    generators = [np.random.Generator(np.random.Philox(child)) for child in seed.spawn(mc_samples)]
    if n_jobs == 1:
        iterator = generators
        if progress and tqdm is not None:
            iterator = tqdm(generators, desc=f"uncertainty[{label}]")
        samples = [_run_sample(model, probs, counts_total, resample, varied, rng) for rng in iterator]
    else:
        samples = Parallel(n_jobs=n_jobs)(
            delayed(_run_sample)(model, probs, counts_total, resample, varied, rng) for rng in generators
        )
    kept = [s for s in samples if s is not None]
    dropped = mc_samples - len(kept)
    if dropped:
        logger.warning(f"[Uncertainty] {label}: dropped {dropped} of {mc_samples} samples")
    if dropped > MAX_DROPPED_FRACTION * mc_samples or len(kept) < 2:
        raise TooManyDroppedSamplesError(f"{label}: {dropped} of {mc_samples} samples failed (limit 10%)")
    return kept


def _sigma(samples: List[_Sample]) -> np.ndarray:
    return np.std(np.stack([s.distribution for s in samples]), axis=0, ddof=1)


def _scalar_sigma(values: List[Optional[float]]) -> Optional[float]:
    finite = [v for v in values if v is not None]
    return float(np.std(finite, ddof=1)) if len(finite) > 1 else None


def propagate(
    C: NumberDistribution,
    counts_total: float,
    params: DetectorParams,
    profile: PhotonProfile,
    order: int,
    cfg: Optional[EmeConfig] = None,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    ap_order: int = 2,
    recovery: Optional[Union[RecoveryMatrix, np.ndarray]] = None,
    sources: Sequence[str] = SOURCES,
    n_jobs: int = 1,
    progress: bool = False,
) -> UncertaintyReport:
    """
    Monte Carlo error bars for the reconstruction of C

    Args:
        C: Measured click distribution (its length fixes n_max)
        counts_total: Number of cycles behind C (Poisson resampling scale)
        params: Detector parameters with one-sigma uncertainties
        profile: Photon profile of the window
        order: Recovery order for R (built once unless `recovery` is given)
        recovery: Precomputed R, as RecoveryMatrix or plain matrix
        cfg: EME settings
        mc_samples: Samples per run, >= 2
        seed: Root seed; runs and samples get spawned child seeds
        sources: Parameters broken down individually
        n_jobs: joblib workers over samples
        progress: tqdm progress bar when running serially

    Raises:
        TooManyDroppedSamplesError: More than 10 % of a run failed
    """
    if mc_samples < 2:
        raise InputError(f"mc_samples must be >= 2, got {mc_samples}")
    unknown = set(sources) - set(SOURCES)
    if unknown:
        raise InputError(f"Unknown uncertainty sources {sorted(unknown)}; known: {list(SOURCES)}")
    started = time.perf_counter()
    cfg = cfg or EmeConfig()
    n_max = C.n_max
    if recovery is None:
        recovery = build_recovery_matrix(profile, params.loss_model(), n_max, order, n_jobs=n_jobs)
    matrix = recovery.matrix if isinstance(recovery, RecoveryMatrix) else np.asarray(recovery, dtype=float)
    if matrix.shape != (n_max + 1, n_max + 1):
        raise InputError(f"Recovery matrix shape {matrix.shape} does not match n_max {n_max}")
    model = _Model(profile=profile, recovery=matrix, params=params, n_max=n_max,
                   ap_order=ap_order, cfg=cfg)

    runs: Dict[str, tuple] = {"full": (True, SOURCES), "sampling": (True, ())}
    for source in sources:
        runs[source] = (False, (source,))
    seeds = dict(zip(runs, np.random.SeedSequence(seed).spawn(len(runs))))

    results: Dict[str, List[_Sample]] = {}
    dropped: Dict[str, int] = {}
    for label, (resample, varied) in runs.items():
        results[label] = _run(model, C.probs, counts_total, resample, varied, seeds[label], mc_samples,
                              label, n_jobs, progress)
        dropped[label] = mc_samples - len(results[label])

    breakdown = {source: _sigma(results[source]).tolist() for source in sources}
    breakdown["R"] = [0.0] * (n_max + 1)
    g2_breakdown = {}
    for source in sources:
        value = _scalar_sigma([s.g2 for s in results[source]])
        if value is not None:
            g2_breakdown[source] = value
    elapsed = time.perf_counter() - started
    track_stage("uncertainty", f"{len(runs)} runs x {mc_samples}", elapsed)
    logger.info(f"[Uncertainty] {len(runs)} runs of {mc_samples} samples in {elapsed:.1f}s")

    return UncertaintyReport(
        sampling_sigma=_sigma(results["sampling"]).tolist(),
        full_sigma=_sigma(results["full"]).tolist(),
        breakdown=breakdown,
        g2_sigma=_scalar_sigma([s.g2 for s in results["full"]]),
        g2_sigma_sampling=_scalar_sigma([s.g2 for s in results["sampling"]]),
        g2_breakdown=g2_breakdown,
        nbar_fit_sigma=_scalar_sigma([s.nbar_fit for s in results["full"]]),
        nbar_fit_breakdown={k: _scalar_sigma([s.nbar_fit for s in results[k]]) or 0.0 for k in sources},
        mean_distribution=np.mean(np.stack([s.distribution for s in results["full"]]), axis=0).tolist(),
        mc_samples=mc_samples,
        counts_total=counts_total,
        seed=seed,
        dropped=dropped,
    )
