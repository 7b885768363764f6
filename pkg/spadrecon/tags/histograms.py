"""
Second-order delay histograms of a time-tag stream

Two families are built from the same data:

- first-and-n: delay from each click to the (n-1)th click after it
- full correlation: delays between all ordered click pairs up to a maximum delay

Pairs never span two cycles. A cw record is a single continuous cycle.
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from spadrecon.core.schemas import DEFAULT_BIN_TICKS
from spadrecon.errors import InputError
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)

# Cycles per worker task when histogramming in parallel
CHUNK_CYCLES = 4096


class HistogramKind(str, Enum):
    FIRST_AND_N = "first_and_n"
    FULL_CORRELATION = "full_correlation"


@dataclass(frozen=True)
class DelayHistogram:
    """Counts of click-pair delays, bin i covering [i, i+1) * bin_width ticks"""
    kind: HistogramKind
    bin_width: int
    counts: np.ndarray
    n_source_clicks: int
    collection_time: float
    tick_duration: float
    n: Optional[int] = None
    cross_cycle: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise InputError("Histogram counts must be >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_seconds(self) -> float:
        return self.bin_width * self.tick_duration

    def delays_seconds(self) -> np.ndarray:
        """Bin start of every bin in s"""
        return np.arange(self.n_bins) * self.bin_seconds

    def bin_centers(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_seconds

    def first_nonzero_delay(self) -> Optional[float]:
        nonzero = np.flatnonzero(self.counts)
        return float(nonzero[0] * self.bin_seconds) if nonzero.size else None

    def peak_delay(self) -> Optional[float]:
        """Center of the most populated bin"""
        if self.total == 0:
            return None
        return float(self.bin_centers()[int(np.argmax(self.counts))])

    def to_text(self, path: str) -> str:
        """Two-column export: bin start in s, count"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        label = self.kind.value if self.n is None else f"{self.kind.value} n={self.n}"
        header = (f"{label} bin_width_ticks={self.bin_width} source_clicks={self.n_source_clicks} "
                  f"t0={self.collection_time:.9g}\nbin_start_s count")
        np.savetxt(path, np.column_stack([self.delays_seconds(), self.counts]),
                   fmt=["%.9e", "%d"], header=header)
        return path


def _merge(partials: List[np.ndarray]) -> np.ndarray:
    size = max((p.size for p in partials), default=0)
    merged = np.zeros(size, dtype=np.int64)
    for partial in partials:
        merged[:partial.size] += partial
    return merged


def _bin_count(max_delay: int, bin_width: int) -> int:
    """Whole bins covering [0, max_delay)"""
    return -(-int(max_delay) // bin_width)


def _first_and_n_chunk(cycles, lag: int, bin_width: int, n_bins: Optional[int]) -> np.ndarray:
    pieces = [times[lag:] - times[:-lag] for times in cycles if times.size > lag]
    if not pieces:
        return np.zeros(0, dtype=np.int64)
    bins = np.concatenate(pieces) // bin_width
    if n_bins is None:
        return np.bincount(bins)
    return np.bincount(bins[bins < n_bins], minlength=n_bins)


def _full_correlation_chunk(cycles, n_bins: int, bin_width: int) -> np.ndarray:
    limit = n_bins * bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    for times in cycles:
        for lag in range(1, times.size):
            delays = times[lag:] - times[:-lag]
            delays = delays[delays < limit]
            if delays.size == 0:
                break
            counts += np.bincount(delays // bin_width, minlength=n_bins)
    return counts


def _run_chunks(stream: TimeTagStream, worker, n_jobs: int, *args) -> np.ndarray:
    chunks = [stream.cycles[i:i + CHUNK_CYCLES] for i in range(0, stream.n_cycles, CHUNK_CYCLES)]
    if n_jobs == 1 or len(chunks) <= 1:
        partials = [worker(chunk, *args) for chunk in chunks]
    else:
        partials = Parallel(n_jobs=n_jobs)(delayed(worker)(chunk, *args) for chunk in chunks)
    return _merge(partials)


def first_and_n_histogram(stream: TimeTagStream, n: int, bin_width: int = DEFAULT_BIN_TICKS,
                          max_delay: Optional[int] = None, n_jobs: int = 1) -> DelayHistogram:
    """
    Histogram the delay from every click to its (n-1)th successor in the same cycle

    Args:
        stream: Time tags
        n: Histogram order, >= 2 (n=2 is the usual start-stop histogram)
        bin_width: Bin width in ticks
        max_delay: Optional cut in ticks; longer delays are left out
        n_jobs: joblib workers over cycle chunks

    Returns:
        DelayHistogram; without a cut its total is the sum over cycles of
        max(0, clicks - (n-1))
    """
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if bin_width < 1:
        raise InputError(f"bin_width must be >= 1 tick, got {bin_width}")
    if max_delay is not None and max_delay <= 0:
        raise InputError(f"max_delay must be > 0, got {max_delay}")
    n_bins = None if max_delay is None else _bin_count(max_delay, bin_width)
    counts = _run_chunks(stream, _first_and_n_chunk, n_jobs, n - 1, bin_width, n_bins)
    if n_bins is not None and counts.size < n_bins:
        counts = np.pad(counts, (0, n_bins - counts.size))
    logger.debug(f"[Tags] first-and-{n} histogram: {int(counts.sum())} delays in {counts.size} bins")
    return DelayHistogram(kind=HistogramKind.FIRST_AND_N, bin_width=bin_width, counts=counts,
                          n_source_clicks=stream.total_clicks, collection_time=stream.collection_time,
                          tick_duration=stream.tick_duration, n=n)


def full_correlation_histogram(stream: TimeTagStream, bin_width: int = DEFAULT_BIN_TICKS,
                               max_delay: Optional[int] = None, n_jobs: int = 1) -> DelayHistogram:
    """
    Histogram the delays of all ordered click pairs below max_delay ticks

    max_delay defaults to the record length, which makes the histogram cover
    the whole data-collection span of a cw record.
    """
    if max_delay is None:
        max_delay = stream.cycle_length
    if max_delay <= 0:
        raise InputError(f"max_delay must be > 0, got {max_delay}")
    if bin_width < 1:
        raise InputError(f"bin_width must be >= 1 tick, got {bin_width}")
    n_bins = _bin_count(max_delay, bin_width)
    counts = _run_chunks(stream, _full_correlation_chunk, n_jobs, n_bins, bin_width)
    if counts.size == 0:
        counts = np.zeros(n_bins, dtype=np.int64)
    logger.debug(f"[Tags] full correlation histogram: {int(counts.sum())} pairs up to {max_delay} ticks")
    return DelayHistogram(kind=HistogramKind.FULL_CORRELATION, bin_width=bin_width, counts=counts,
                          n_source_clicks=stream.total_clicks, collection_time=stream.collection_time,
                          tick_duration=stream.tick_duration)
