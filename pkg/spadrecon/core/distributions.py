"""
Photon/click number distributions and probability-vector utilities
"""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.stats import poisson

from spadrecon.errors import AllZeroError, DimensionMismatchError, InputError

SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NumberDistribution:
    """Probability vector over n = 0..n_max

    The array is stored read-only so instances can be shared freely.
    """
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).ravel()
        if probs.size == 0:
            raise InputError("NumberDistribution needs at least one entry")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InputError(f"Probabilities must be finite and >= 0, got min {probs.min()}")
        total = probs.sum()
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InputError(f"Probabilities must sum to 1 (got {total:.12g}); use normalize()")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __len__(self) -> int:
        return self.probs.size

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def factorial_moment(self, order: int = 2) -> float:
        """<n(n-1)...(n-order+1)>"""
        n = np.arange(self.probs.size, dtype=float)
        falling = np.ones_like(n)
        for k in range(order):
            falling *= n - k
        return float(np.dot(falling, self.probs))

    def to_list(self) -> list:
        return self.probs.tolist()

    def resized(self, n_max: int) -> "NumberDistribution":
        """Zero-pad, or truncate folding the tail into the top entry"""
        if n_max >= self.n_max:
            return NumberDistribution(np.pad(self.probs, (0, n_max - self.n_max)))
        probs = self.probs[: n_max + 1].copy()
        probs[-1] += self.probs[n_max + 1:].sum()
        return NumberDistribution(probs)


def normalize(raw: Union[Sequence[float], np.ndarray]) -> NumberDistribution:
    """
    Clamp negatives to zero and scale to unit sum

    Args:
        raw: Nonnegative (up to round-off) weights indexed by n

    Returns:
        NumberDistribution with the same length

    Raises:
        AllZeroError: If no entry is positive after clamping

    Examples:
        >>> normalize([2, 2, 0]).to_list()
        [0.5, 0.5, 0.0]
    """
    values = np.clip(np.asarray(raw, dtype=float).ravel(), 0.0, None)
    total = values.sum()
    if not total > 0:
        raise AllZeroError(f"Cannot normalize a vector with no positive entry (length {values.size})")
    return NumberDistribution(values / total)


def poisson_pmf_vector(nbar: float, n_max: int) -> NumberDistribution:
    """Poisson(nbar) on 0..n_max, renormalized over the truncated basis"""
    if nbar < 0:
        raise InputError(f"nbar must be >= 0, got {nbar}")
    if n_max < 0:
        raise InputError(f"n_max must be >= 0, got {n_max}")
    return normalize(poisson.pmf(np.arange(n_max + 1), nbar))


def default_n_max(nbar: float, tail: float = 1e-6, minimum: int = 10) -> int:
    """Smallest n with Poisson tail mass beyond n below `tail`, at least `minimum`"""
    if nbar <= 0:
        return minimum
    return max(minimum, int(poisson.ppf(1.0 - tail, nbar)))


def total_variation(p1: NumberDistribution, p2: NumberDistribution) -> float:
    if len(p1) != len(p2):
        raise DimensionMismatchError(f"Length mismatch: {len(p1)} vs {len(p2)}")
    return float(0.5 * np.abs(p1.probs - p2.probs).sum())


def dead_time_corrected_rate(measured_rate: float, t_dead: float) -> float:
    """Non-paralyzable correction r' = r / (1 - r t_D)"""
    denominator = 1.0 - measured_rate * t_dead
    if denominator <= 0:
        raise InputError(f"Rate {measured_rate:g}/s saturates a {t_dead:g} s dead time")
    return measured_rate / denominator
