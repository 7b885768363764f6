"""
Count rate from first-and-n histograms

To first order in the afterpulse term p_a, the number of events per bin at
delay t is

    P_n(t) = N dt r [1 - (n-1) p_a + (n-1)(n-2) p_a / (r x)] (r x)^(n-2) / (n-2)! e^(-r x),
    x = t - (n-1) tau_r

with tau_r held fixed and no free amplitude. The fit maximizes the Poisson
likelihood of the binned counts (least squares on deviance residuals).
"""

import logging
import time
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammaln

from spadrecon.charfit.bootstrap import DEFAULT_BOOTSTRAP_SAMPLES, bootstrap, bootstrap_sigma
from spadrecon.charfit.schemas import CountRateFit
from spadrecon.errors import FitDivergedError, InputError, InsufficientDataError
from spadrecon.tags.histograms import DelayHistogram, HistogramKind
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)

MIN_FIT_BINS = 3
MIN_FIT_COUNTS = 10
P_A_BOUND = 0.5


def first_and_n_density(t: np.ndarray, r: float, p_a: float, tau_r: float, n: int) -> np.ndarray:
    """Probability density of the delay to the (n-1)th following click"""
    t = np.asarray(t, dtype=float)
    x = t - (n - 1) * tau_r
    density = np.zeros_like(t)
    positive = x > 0
    rx = r * x[positive]
    log_rx = np.log(rx)
    value = (1.0 - (n - 1) * p_a) * np.exp((n - 2) * log_rx - rx - gammaln(n - 1))
    if n >= 3:
        value += (n - 1) * p_a * np.exp((n - 3) * log_rx - rx - gammaln(n - 2))
    density[positive] = r * value
    return density


def deviance_residuals(model: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Signed Poisson deviance residuals; their sum of squares is -2 log L up to a constant"""
    model = np.maximum(model, 1e-300)
    safe = np.where(counts > 0, counts, 1.0)
    term = model - counts + np.where(counts > 0, counts * np.log(safe / model), 0.0)
    return np.sign(counts - model) * np.sqrt(2.0 * np.maximum(term, 0.0))


def default_fit_start(hist: DelayHistogram, tau_r: float, peak_delay: Optional[float] = None) -> float:
    """
    First delay to fit: first nonzero bin plus n/5 times (peak - tau_r)

    peak_delay is the maximum of the first-and-third histogram of the same
    data; without it the peak of `hist` is used. The start never falls below
    2 tau_r.
    """
    first = hist.first_nonzero_delay()
    if first is None:
        raise InsufficientDataError("Histogram is empty")
    peak = peak_delay if peak_delay is not None else hist.peak_delay()
    start = first + hist.n / 5.0 * (peak - tau_r)
    if start < 2.0 * tau_r:
        logger.warning(f"[CharFit] Fit start {start:.3g}s below 2 tau_r, clamped to {2.0 * tau_r:.3g}s")
        start = 2.0 * tau_r
    return start


def _fit(centers, counts, total, bin_seconds, tau_r, n, x0):
    def residuals(params):
        model = total * bin_seconds * first_and_n_density(centers, params[0], params[1], tau_r, n)
        return deviance_residuals(model, counts)

    return least_squares(residuals, x0=x0, bounds=([1e-12, 0.0], [np.inf, P_A_BOUND]), method="trf",
                         x_scale=[x0[0], 0.01], xtol=1e-10, ftol=1e-10, gtol=1e-10)


def fit_count_rate(
    hist: DelayHistogram,
    tau_r: Optional[float] = None,
    fit_start: Optional[float] = None,
    peak_delay: Optional[float] = None,
    n_bootstrap: int = DEFAULT_BOOTSTRAP_SAMPLES,
    seed: Optional[int] = None,
    n_jobs: int = 1,
) -> CountRateFit:
    """
    Fit r and p_a to a first-and-n histogram with tau_r fixed

    Args:
        hist: First-and-n histogram, n >= 2
        tau_r: Recovery time; defaults to the first nonzero delay / (n-1)
        fit_start: First delay to fit; defaults to default_fit_start()
        peak_delay: Maximum of the first-and-third histogram, for the default start
        n_bootstrap: Refits on Poisson-resampled fitted counts
        seed: Bootstrap seed
        n_jobs: joblib workers for the bootstrap

    Returns:
        CountRateFit

    Raises:
        InsufficientDataError: Too few bins or counts beyond the fit start
        FitDivergedError: The optimizer failed
    """
    if hist.kind != HistogramKind.FIRST_AND_N:
        raise InputError(f"Count-rate fits need a first-and-n histogram, got {hist.kind.value}")
    started = time.perf_counter()
    n = hist.n
    first = hist.first_nonzero_delay()
    if first is None:
        raise InsufficientDataError("Histogram is empty")
    if tau_r is None:
        tau_r = first / (n - 1)
    if fit_start is None:
        fit_start = default_fit_start(hist, tau_r, peak_delay)

    centers = hist.bin_centers()
    counts = hist.counts.astype(float)
    last = int(np.flatnonzero(hist.counts)[-1])
    region = (centers >= fit_start) & (centers > (n - 1) * tau_r) & (np.arange(hist.n_bins) <= last)
    if region.sum() < MIN_FIT_BINS or counts[region].sum() < MIN_FIT_COUNTS:
        raise InsufficientDataError(
            f"Only {int(region.sum())} bins / {int(counts[region].sum())} counts beyond fit start {fit_start:.3g}s"
        )

    total = float(hist.total)
    mean_delay = float(np.dot(centers, counts) / counts.sum())
    offset = mean_delay - (n - 1) * tau_r
    r0 = (n - 1) / offset if offset > 0 else 1.0 / mean_delay

    t_fit, c_fit = centers[region], counts[region]
    result = _fit(t_fit, c_fit, total, hist.bin_seconds, tau_r, n, [r0, 0.0])
    rate, p_a = float(result.x[0]), float(result.x[1])
    if not result.success or not np.isfinite(rate) or rate <= 1e-12:
        raise FitDivergedError(f"Count-rate fit failed: {result.message}")

    jac = result.jac
    covariance = np.linalg.pinv(jac.T @ jac)
    fitted = total * hist.bin_seconds * first_and_n_density(t_fit, rate, p_a, tau_r, n)

    def refit(rng):
        resampled = rng.poisson(fitted).astype(float)
        return _fit(t_fit, resampled, total, hist.bin_seconds, tau_r, n, [rate, p_a]).x[0]

    samples = bootstrap(refit, n_bootstrap, seed=seed, n_jobs=n_jobs)
    elapsed = time.perf_counter() - started
    track_stage("charfit", f"count rate n={n}", elapsed, iterations=int(result.nfev), converged=True)
    logger.info(f"[CharFit] first-and-{n}: r = {rate:.6g}/s (p_a fit {p_a:.3g}, start {fit_start:.3g}s)")

    return CountRateFit(
        rate=rate,
        rate_sigma=bootstrap_sigma(samples),
        p_a_fit=p_a,
        p_a_fit_sigma=float(np.sqrt(max(covariance[1, 1], 0.0))),
        tau_r_constraint=tau_r,
        fit_start=fit_start,
        n=n,
        covariance=covariance.tolist(),
        n_bins_fit=int(region.sum()),
    )
