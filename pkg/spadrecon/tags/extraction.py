"""
Photon profile and click-number distribution from a time-tag stream
"""

import logging
from typing import Optional

import numpy as np

from spadrecon.core.distributions import NumberDistribution
from spadrecon.core.profiles import PhotonProfile
from spadrecon.core.schemas import CycleWindow
from spadrecon.errors import InputError, NoSingleClickCyclesError
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)

OVERFLOW_WARNING = 1e-6


def _window_slices(stream: TimeTagStream, window: CycleWindow):
    """Click times (ticks) of every cycle that fall inside the window"""
    start, end = window.tick_bounds(stream.tick_duration)
    for times in stream.cycles:
        lo, hi = np.searchsorted(times, [start, end])
        yield times[lo:hi]


def clicks_in_window(stream: TimeTagStream, window: CycleWindow) -> np.ndarray:
    """Per-cycle click count inside the window"""
    start, end = window.tick_bounds(stream.tick_duration)
    return np.array([np.searchsorted(t, end) - np.searchsorted(t, start) for t in stream.cycles], dtype=np.int64)


def estimate_photon_profile(stream: TimeTagStream, window: CycleWindow) -> PhotonProfile:
    """
    Photon profile from the arrival times in cycles with exactly one click

    Background clicks are kept in the profile. The result is normalized to
    unit total mass on the window's bin grid.

    Raises:
        NoSingleClickCyclesError: If no cycle has exactly one click in the window
    """
    singles = [times[0] for times in _window_slices(stream, window) if times.size == 1]
    if not singles:
        raise NoSingleClickCyclesError(f"No single-click cycles among {stream.n_cycles} in the window")

    offsets = np.asarray(singles, dtype=float) * stream.tick_duration - window.t_start
    bins = np.clip(np.floor(offsets / window.bin_width).astype(np.int64), 0, window.n_bins - 1)
    counts = np.bincount(bins, minlength=window.n_bins).astype(float)
    logger.debug(f"[Tags] Photon profile from {len(singles)} single-click cycles over {window.n_bins} bins")
    return PhotonProfile(bin_width=window.bin_width, values=counts / counts.sum(), start=window.t_start)


def click_number_distribution(stream: TimeTagStream, window: CycleWindow,
                              n_max: Optional[int] = None) -> NumberDistribution:
    """
    Empirical distribution of clicks per cycle inside the window

    Args:
        stream: Time tags (at least one cycle)
        window: Analysis window
        n_max: Truncation; counts above it fold into the top entry. Defaults
            to the largest observed count.

    Returns:
        NumberDistribution of length n_max + 1
    """
    if stream.n_cycles == 0:
        raise InputError("Click distribution needs at least one cycle")
    counts = clicks_in_window(stream, window)
    if n_max is None:
        n_max = int(counts.max())
    tally = np.bincount(counts, minlength=n_max + 1)
    overflow = int(tally[n_max + 1:].sum())
    tally = tally[: n_max + 1].copy()
    tally[n_max] += overflow

    overflow_mass = overflow / stream.n_cycles
    if overflow_mass > OVERFLOW_WARNING:
        logger.warning(f"[Tags] {overflow_mass:.3g} of cycles exceed n_max={n_max}; folded into the top entry")
    return NumberDistribution(tally / stream.n_cycles)
