"""
Afterpulse profile and recovery time from a dark first-and-second histogram
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np

from spadrecon.charfit.background import DEFAULT_TAIL_START
from spadrecon.charfit.bootstrap import DEFAULT_BOOTSTRAP_SAMPLES, bootstrap, bootstrap_sigma
from spadrecon.charfit.schemas import AfterpulseProfile
from spadrecon.errors import InputError, InsufficientDataError
from spadrecon.tags.histograms import DelayHistogram, HistogramKind
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)


def _check_first_and_second(hist: DelayHistogram):
    if hist.kind != HistogramKind.FIRST_AND_N or hist.n != 2:
        raise InputError("Expected a first-and-second histogram")


def recovery_time_from_histogram(hist: DelayHistogram) -> float:
    """Recovery time: start of the first nonzero bin of a first-and-second histogram"""
    _check_first_and_second(hist)
    first = hist.first_nonzero_delay()
    if first is None:
        raise InsufficientDataError("First-and-second histogram is empty")
    return first


def _background_amplitude(counts: np.ndarray, decay: np.ndarray) -> float:
    """Poisson maximum likelihood amplitude A of counts ~ A exp(-r_b t)"""
    return float(counts.sum() / decay.sum())


def _subtract(counts, centers, r_b, tail, t_rec, fit_start, n_clicks) -> Tuple[np.ndarray, float]:
    decay = np.exp(-r_b * centers)
    amplitude = _background_amplitude(counts[tail], decay[tail])
    profile = (counts - amplitude * decay) / n_clicks
    profile[centers < t_rec] = 0.0
    return profile[centers < fit_start], amplitude


def extract_afterpulse_profile(
    hist: DelayHistogram,
    r_b: float,
    t_rec: float,
    r_b_sigma: float = 0.0,
    fit_start: float = DEFAULT_TAIL_START,
    n_bootstrap: int = DEFAULT_BOOTSTRAP_SAMPLES,
    seed: Optional[int] = None,
    n_jobs: int = 1,
) -> AfterpulseProfile:
    """
    Subtract the extrapolated background exponential and normalize per click

    The background A exp(-r_b t) is fitted beyond fit_start with r_b fixed,
    extrapolated to zero delay and subtracted. Bins inside the recovery time
    are set to zero; negative noise bins are kept. The profile runs up to
    fit_start and is divided by the number of clicks in the dataset.

    The uncertainty comes from refits on Poisson-resampled histograms with
    r_b drawn from N(r_b, r_b_sigma).

    Raises:
        InsufficientDataError: No counts beyond fit_start
    """
    _check_first_and_second(hist)
    started = time.perf_counter()
    centers = hist.bin_centers()
    counts = hist.counts.astype(float)
    tail = centers >= fit_start
    if counts[tail].sum() == 0:
        raise InsufficientDataError(f"No first-and-second counts beyond {fit_start:g}s")
    n_clicks = max(hist.n_source_clicks, 1)

    profile, amplitude = _subtract(counts, centers, r_b, tail, t_rec, fit_start, n_clicks)

    def refit(rng):
        resampled = rng.poisson(counts).astype(float)
        rate = max(rng.normal(r_b, r_b_sigma), 0.0) if r_b_sigma > 0 else r_b
        sampled, _ = _subtract(resampled, centers, rate, tail, t_rec, fit_start, n_clicks)
        return sampled.sum()

    samples = bootstrap(refit, n_bootstrap, seed=seed, n_jobs=n_jobs)
    p_total = float(profile.sum())
    track_stage("charfit", "afterpulse profile", time.perf_counter() - started)
    logger.info(f"[CharFit] Afterpulse probability {p_total:.5g} over {profile.size} bins")
    return AfterpulseProfile(
        profile=profile.tolist(),
        bin_width=hist.bin_seconds,
        p_total=p_total,
        sigma=bootstrap_sigma(samples),
        amplitude=amplitude,
        t_rec=t_rec,
    )
