"""
Detector effects peak (DEP): click fraction, reset time and dead-time cross-check

At low rate the DEP fraction grows linearly with the count rate,

    p_DEP ~ p_a + (1 - p_a) r t_reset / 2,

and saturates as p_a + (1 - p_a)(1 - exp(-r t_reset / 2)). The click deficit of
a cw stream follows 1 - exp(-r (t_rec + t_dead) / 2).
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from spadrecon.charfit.bootstrap import DEFAULT_BOOTSTRAP_SAMPLES, bootstrap, bootstrap_sigma
from spadrecon.charfit.schemas import DeadTimeCheck, DepMeasurement, ResetTimeFit
from spadrecon.errors import InputError, InsufficientDataError
from spadrecon.tags.histograms import DelayHistogram, HistogramKind
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)

DEFAULT_LINEAR_RATE_LIMIT = 5e6


def _dep_sum(counts, centers, bin_seconds, n_clicks, r, p_a, tau_r) -> float:
    growth = np.exp(r * (centers - tau_r))
    background = n_clicks * bin_seconds * (1.0 - p_a) * r / growth
    remainder = counts - background
    peak = int(np.argmax(remainder))
    early = (np.arange(remainder.size) < peak) & (centers < tau_r)
    # negative bins before the peak inside the recovery time count as genuine clicks
    remainder = np.where(early & (remainder < 0), counts, remainder)
    window = centers < 2.0 * tau_r
    return float(np.sum(remainder[window] * growth[window]))


def measure_dep_fraction(
    hist: DelayHistogram,
    r: float,
    p_a: float,
    tau_r: float,
    r_sigma: float = 0.0,
    n_bootstrap: int = DEFAULT_BOOTSTRAP_SAMPLES,
    seed: Optional[int] = None,
    n_jobs: int = 1,
) -> DepMeasurement:
    """
    Fraction of clicks in the DEP of an illuminated first-and-second histogram

    Subtracts N dt (1 - p_a) r exp(-r (t - tau_r)), adds back negative bins
    preceding the maximum, divides by exp(-r (t - tau_r)), sums up to 2 tau_r
    and divides by the number of clicks N.

    The uncertainty is the quadrature of the counting error of the summed bins
    and the spread from rates drawn from N(r, r_sigma).
    """
    if hist.kind != HistogramKind.FIRST_AND_N or hist.n != 2:
        raise InputError("DEP fractions need a first-and-second histogram")
    if r <= 0:
        raise InputError(f"Count rate must be > 0, got {r}")
    n_clicks = max(hist.n_source_clicks, 1)
    centers = hist.bin_centers()
    counts = hist.counts.astype(float)

    dep = _dep_sum(counts, centers, hist.bin_seconds, n_clicks, r, p_a, tau_r) / n_clicks
    counting = np.sqrt(counts[centers < 2.0 * tau_r].sum()) / n_clicks
    slope_term = 0.0
    if r_sigma > 0:
        samples = bootstrap(
            lambda rng: _dep_sum(counts, centers, hist.bin_seconds, n_clicks,
                                 max(rng.normal(r, r_sigma), 1e-12), p_a, tau_r) / n_clicks,
            n_bootstrap, seed=seed, n_jobs=n_jobs)
        slope_term = bootstrap_sigma(samples)

    sigma = float(np.hypot(counting, slope_term))
    logger.debug(f"[CharFit] DEP fraction {dep:.5g} +/- {sigma:.2g} at r = {r:.4g}/s")
    return DepMeasurement(rate=r, dep_fraction=float(np.clip(dep, 0.0, 1.0)), sigma=sigma)


def dep_model(rate, p_a: float, t_reset: float):
    """Saturating DEP probability"""
    return p_a + (1.0 - p_a) * (1.0 - np.exp(-np.asarray(rate, dtype=float) * t_reset / 2.0))


def fit_reset_time(
    points: Sequence[DepMeasurement],
    p_a: float,
    max_rate: float = DEFAULT_LINEAR_RATE_LIMIT,
) -> ResetTimeFit:
    """
    Reset time from a weighted linear fit with the intercept fixed at p_a

    Only points below max_rate enter the fit; parameter uncertainties are
    scaled so that the reduced chi2 is one. Residuals against the saturating
    model are reported for every point.

    Raises:
        InsufficientDataError: Fewer than two points below max_rate
    """
    low = [p for p in points if p.rate < max_rate]
    if len(low) < 2:
        raise InsufficientDataError(f"Need >= 2 DEP points below {max_rate:g}/s, got {len(low)}")
    rates = np.array([p.rate for p in low])
    values = np.array([p.dep_fraction for p in low])
    sigmas = np.array([p.sigma for p in low])
    weights = sigmas if np.all(sigmas > 0) else None

    slope_guess = float(np.dot(rates, values - p_a) / np.dot(rates, rates))
    popt, pcov = curve_fit(lambda x, slope: p_a + slope * x, rates, values, p0=[slope_guess],
                           sigma=weights, absolute_sigma=False)
    slope = float(popt[0])
    slope_sigma = float(np.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else 0.0
    t_reset = 2.0 * slope / (1.0 - p_a)
    sigma = 2.0 * slope_sigma / (1.0 - p_a)

    all_rates = np.array([p.rate for p in points])
    residuals = np.array([p.dep_fraction for p in points]) - dep_model(all_rates, p_a, t_reset)
    logger.info(f"[CharFit] t_reset = {t_reset * 1e9:.4g} +/- {sigma * 1e9:.2g} ns from {len(low)} points")
    return ResetTimeFit(t_reset=t_reset, sigma=sigma, slope=slope, p_a=p_a, max_rate=max_rate,
                        n_points=len(low), residuals=residuals.tolist())


def loss_point(stream: TimeTagStream, r: float, p_a: float) -> Tuple[float, float]:
    """
    Fraction of clicks lost to recovery effects in a cw stream

    Returns:
        (p_lost, sigma) with p_lost = (r T - N (1 - p_a)) / (r T) and sigma
        from sqrt(N) counting error
    """
    expected = r * stream.collection_time
    if expected <= 0:
        raise InputError("Loss point needs r > 0 and a nonzero collection time")
    n_clicks = stream.total_clicks
    p_lost = (expected - n_clicks * (1.0 - p_a)) / expected
    return float(p_lost), float(np.sqrt(n_clicks) * (1.0 - p_a) / expected)


def dead_time_consistency(
    streams: Sequence[TimeTagStream],
    rates: Sequence[float],
    p_a: float,
    t_reset: float,
    t_reset_sigma: float = 0.0,
) -> DeadTimeCheck:
    """
    Recovery time from the click deficit over a cw rate sweep

    Fits p_lost = 1 - exp(-r u) with u = (t_rec + t_dead) / 2, then uses
    t_rec - t_dead = t_reset to return t_rec = u + t_reset / 2. The exponential
    form is a low-rate model; at r u around 0.1 it overstates the loss of a
    non-paralyzable detector by a few percent.

    Raises:
        InsufficientDataError: Fewer than two streams
    """
    if len(streams) != len(rates):
        raise InputError(f"{len(streams)} streams but {len(rates)} rates")
    if len(streams) < 2:
        raise InsufficientDataError("Dead-time consistency needs at least two rates")
    losses: List[Tuple[float, float]] = [loss_point(s, r, p_a) for s, r in zip(streams, rates)]
    rate_array = np.asarray(rates, dtype=float)
    p_lost = np.array([value for value, _ in losses])
    sigmas = np.array([sigma for _, sigma in losses])

    guess = max(float(np.dot(rate_array, p_lost) / np.dot(rate_array, rate_array)), 1e-12)
    popt, pcov = curve_fit(lambda x, u: 1.0 - np.exp(-x * u), rate_array, p_lost, p0=[guess],
                           sigma=sigmas if np.all(sigmas > 0) else None, absolute_sigma=False,
                           bounds=(0.0, np.inf))
    u = float(popt[0])
    u_sigma = float(np.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else 0.0
    t_rec = u + t_reset / 2.0
    sigma = float(np.hypot(u_sigma, t_reset_sigma / 2.0))
    logger.info(f"[CharFit] t_rec from click deficit: {t_rec * 1e9:.4g} +/- {sigma * 1e9:.2g} ns")
    return DeadTimeCheck(t_rec_check=t_rec, sigma=sigma, mean_loss_time=u,
                         rates=rate_array.tolist(), p_lost=p_lost.tolist())
