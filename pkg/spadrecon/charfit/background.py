"""
Background rate from the long-delay tail of a full correlation histogram

For a Poisson stream the pair count per bin at large delay t is
r^2 dt (t0 - t), whose x-intercept is the collection time t0.
"""

import logging
import time
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from spadrecon.charfit.bootstrap import DEFAULT_BOOTSTRAP_SAMPLES, bootstrap, bootstrap_sigma
from spadrecon.charfit.schemas import BackgroundFit
from spadrecon.errors import InputError, InsufficientDataError
from spadrecon.tags.histograms import DelayHistogram, HistogramKind
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)

DEFAULT_TAIL_START = 100e-6
FIT_METHODS = ("least_squares", "likelihood")


def _fit_rate(counts: np.ndarray, exposure: np.ndarray, method: str = "least_squares") -> float:
    """
    Fit r for counts ~ r^2 * exposure

    "least_squares" minimizes the squared residuals of the tail line;
    "likelihood" maximizes the Poisson likelihood of the bin counts.
    """
    guess = np.sqrt(counts.sum() / exposure.sum())
    upper = 10.0 * guess + 1.0

    if method == "least_squares":
        def objective(r):
            return float(np.sum((counts - r * r * exposure) ** 2))
    elif method == "likelihood":
        def objective(r):
            model = np.maximum(r * r * exposure, 1e-300)
            return float(np.sum(model - counts * np.log(model)))
    else:
        raise InputError(f"Unknown background fit method '{method}', expected one of {FIT_METHODS}")

    result = minimize_scalar(objective, bounds=(0.0, upper), method="bounded",
                             options={"xatol": 1e-10 * max(guess, 1.0)})
    return float(result.x)


def fit_background_rate(
    hist: DelayHistogram,
    t0: Optional[float] = None,
    fit_start: float = DEFAULT_TAIL_START,
    n_bootstrap: int = DEFAULT_BOOTSTRAP_SAMPLES,
    seed: Optional[int] = None,
    n_jobs: int = 1,
    method: str = "least_squares",
) -> BackgroundFit:
    """
    Fit r_b from the pair counts beyond fit_start

    Args:
        hist: Full correlation histogram of dark data
        t0: Data collection time; defaults to the histogram's collection time
        fit_start: First delay in the fit (default 100 us)
        n_bootstrap: Refits on Poisson-resampled fitted bin counts
        method: "least_squares" line fit or "likelihood" Poisson fit of the tail

    Raises:
        InsufficientDataError: No counts beyond fit_start
        InputError: Wrong histogram kind or unknown method
    """
    if hist.kind != HistogramKind.FULL_CORRELATION:
        raise InputError(f"Background fits need a full correlation histogram, got {hist.kind.value}")
    if method not in FIT_METHODS:
        raise InputError(f"Unknown background fit method '{method}', expected one of {FIT_METHODS}")
    started = time.perf_counter()
    t0 = hist.collection_time if t0 is None else t0
    centers = hist.bin_centers()
    region = (centers >= fit_start) & (centers < t0)
    counts = hist.counts[region].astype(float)
    if counts.size == 0 or counts.sum() == 0:
        raise InsufficientDataError(f"No pair counts between {fit_start:g}s and t0={t0:g}s")

    exposure = hist.bin_seconds * (t0 - centers[region])
    r_b = _fit_rate(counts, exposure, method)
    fitted = r_b * r_b * exposure

    samples = bootstrap(lambda rng: _fit_rate(rng.poisson(fitted).astype(float), exposure, method),
                        n_bootstrap, seed=seed, n_jobs=n_jobs)
    track_stage("charfit", "background rate", time.perf_counter() - started)
    logger.info(f"[CharFit] r_b = {r_b:.6g}/s from {int(counts.sum())} pairs ({method})")
    return BackgroundFit(r_b=r_b, sigma=bootstrap_sigma(samples), fit_start=fit_start, collection_time=t0)
