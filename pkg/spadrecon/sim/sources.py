"""
Photon-number sources for the simulator

Every source draws per-cycle photon numbers and exposes the distribution it
samples from, so simulated click statistics can be checked against D P.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammainc

from spadrecon.core.distributions import NumberDistribution, normalize, poisson_pmf_vector
from spadrecon.errors import InputError


class PhotonSource:
    """Base class: per-cycle photon numbers"""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def distribution(self, n_max: int) -> NumberDistribution:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class PoissonSource(PhotonSource):
    """Coherent light: Poisson(nbar) photons per cycle"""
    nbar: float

    def __post_init__(self):
        if self.nbar < 0:
            raise InputError(f"nbar must be >= 0, got {self.nbar}")

    def sample(self, rng, size):
        return rng.poisson(self.nbar, size=size)

    def distribution(self, n_max):
        return poisson_pmf_vector(self.nbar, n_max)

    def describe(self):
        return f"Poisson(nbar={self.nbar:g})"


@dataclass(frozen=True)
class FockMixtureSource(PhotonSource):
    """Mixture of number states: weights[n] is the probability of n photons"""
    weights: Sequence[float]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(normalize(self.weights).to_list()))

    def sample(self, rng, size):
        return rng.choice(len(self.weights), size=size, p=np.asarray(self.weights))

    def distribution(self, n_max):
        return NumberDistribution(np.asarray(self.weights)).resized(n_max)

    def describe(self):
        return f"FockMixture({', '.join(f'{w:.3g}' for w in self.weights)})"


@dataclass(frozen=True)
class DriftingPoissonSource(PhotonSource):
    """Poisson light whose mean drifts: per-cycle mean uniform in nbar (1 +/- drift)"""
    nbar: float
    drift: float

    def __post_init__(self):
        if self.nbar < 0 or not 0.0 <= self.drift <= 1.0:
            raise InputError(f"Need nbar >= 0 and drift in [0, 1], got {self.nbar}, {self.drift}")

    @property
    def bounds(self):
        return self.nbar * (1.0 - self.drift), self.nbar * (1.0 + self.drift)

    def sample(self, rng, size):
        low, high = self.bounds
        return rng.poisson(rng.uniform(low, high, size=size))

    def distribution(self, n_max):
        low, high = self.bounds
        if high == low:
            return poisson_pmf_vector(self.nbar, n_max)
        n = np.arange(n_max + 1)
        # integral of the Poisson pmf over its mean is a regularized gamma difference
        probs = (gammainc(n + 1, high) - gammainc(n + 1, low)) / (high - low)
        return normalize(probs)

    def describe(self):
        return f"DriftingPoisson(nbar={self.nbar:g}, drift={self.drift:g})"


@dataclass(frozen=True)
class DistributionSource(PhotonSource):
    """Arbitrary photon-number distribution"""
    dist: NumberDistribution

    def sample(self, rng, size):
        return rng.choice(len(self.dist), size=size, p=self.dist.probs)

    def distribution(self, n_max):
        return self.dist.resized(n_max)

    def describe(self):
        return f"Distribution(n_max={self.dist.n_max})"


def source_from_spec(kind: str, nbar: float = 0.0, weights: Sequence[float] = (), drift: float = 0.0) -> PhotonSource:
    """Build a source by name: "poisson", "fock" or "drift" """
    kind = kind.lower()
    if kind == "poisson":
        return PoissonSource(nbar)
    if kind == "fock":
        if not weights:
            raise InputError("A Fock mixture needs weights")
        return FockMixtureSource(tuple(weights))
    if kind == "drift":
        return DriftingPoissonSource(nbar, drift)
    raise InputError(f"Unknown source '{kind}' (use 'poisson', 'fock' or 'drift')")
