"""
Temporal profiles: the photon profile gamma(t) and the recovery loss profile D(tau)
"""

import hashlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from spadrecon.errors import InputError


@dataclass(frozen=True)
class PhotonProfile:
    """Binned photon flux over the data-collection window

    values are on an arbitrary scale; `start` is the window offset inside a
    cycle in seconds.
    """
    bin_width: float
    values: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if self.bin_width <= 0:
            raise InputError(f"bin_width must be > 0, got {self.bin_width}")
        if values.size == 0:
            raise InputError("PhotonProfile needs at least one bin")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("PhotonProfile values must be finite and >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.size

    @property
    def duration(self) -> float:
        return self.bin_width * self.n_bins

    def bin_masses(self) -> np.ndarray:
        """Per-bin probability mass (sums to 1); zeros if the profile is empty"""
        total = self.values.sum()
        if total <= 0:
            return np.zeros_like(self.values)
        return self.values / total

    def density(self) -> np.ndarray:
        """Values scaled to unit integral over the window"""
        return self.bin_masses() / self.bin_width

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.float64(self.bin_width).tobytes())
        digest.update(np.ascontiguousarray(self.values).tobytes())
        return digest.hexdigest()[:16]


def flat_profile(duration: float, bin_width: float, start: float = 0.0) -> PhotonProfile:
    n_bins = max(1, int(round(duration / bin_width)))
    return PhotonProfile(bin_width=bin_width, values=np.ones(n_bins), start=start)


def gaussian_profile(duration: float, bin_width: float, center: float, fwhm: float,
                     start: float = 0.0) -> PhotonProfile:
    n_bins = max(1, int(round(duration / bin_width)))
    t = (np.arange(n_bins) + 0.5) * bin_width
    sigma = fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    return PhotonProfile(bin_width=bin_width, values=np.exp(-0.5 * ((t - center) / sigma) ** 2), start=start)


def square_pulse_profile(duration: float, bin_width: float, pulse_start: float,
                         pulse_length: float, start: float = 0.0) -> PhotonProfile:
    """Flat pulse occupying [pulse_start, pulse_start + pulse_length) of the window"""
    n_bins = max(1, int(round(duration / bin_width)))
    t = (np.arange(n_bins) + 0.5) * bin_width
    values = ((t >= pulse_start) & (t < pulse_start + pulse_length)).astype(float)
    return PhotonProfile(bin_width=bin_width, values=values, start=start)


@dataclass(frozen=True)
class LossProfileModel:
    """D(tau): 1 during the dead time, linear ramp to 0 at t_rec, 0 afterwards"""
    t_dead: float
    t_rec: float

    def __post_init__(self):
        if self.t_dead < 0 or self.t_rec < self.t_dead:
            raise InputError(f"Need 0 <= t_dead <= t_rec, got t_dead={self.t_dead}, t_rec={self.t_rec}")

    @property
    def t_reset(self) -> float:
        return self.t_rec - self.t_dead

    @classmethod
    def ideal(cls) -> "LossProfileModel":
        return cls(t_dead=0.0, t_rec=0.0)

    def evaluate(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.t_rec == self.t_dead:
            return np.where(tau < self.t_rec, 1.0, 0.0)
        ramp = np.clip((self.t_rec - tau) / (self.t_rec - self.t_dead), 0.0, 1.0)
        return np.where(tau < self.t_dead, 1.0, ramp)

    def discretize(self, bin_width: float) -> Tuple[int, np.ndarray]:
        """
        Sample D at integer bin delays after rounding t_dead and t_rec to bins

        Returns:
            (K, values) where K = t_rec in bins and values[d] = D(d * bin_width)
            for d = 0..K-1; D is zero from delay K on.
        """
        i_dead = int(round(self.t_dead / bin_width))
        i_rec = int(round(self.t_rec / bin_width))
        d = np.arange(i_rec, dtype=float)
        if i_rec == i_dead:
            return i_rec, np.ones(i_rec)
        values = np.where(d < i_dead, 1.0, 1.0 - (d - i_dead) / (i_rec - i_dead))
        return i_rec, values


def hyperexponential_afterpulse_profile(ap_total: float, t_rec: float, bin_width: float,
                                        taus: Tuple[float, ...] = (40e-9, 1e-6),
                                        weights: Tuple[float, ...] = (0.86, 0.14),
                                        length: float = 10e-6) -> np.ndarray:
    """
    Afterpulse probability per delay bin: a sum of exponentials starting at t_rec

    Bins before the recovery time are zero and the result sums to ap_total.
    The default shape puts roughly 87 % of the feature inside the first 200 ns.
    """
    if len(taus) != len(weights):
        raise InputError("taus and weights must have equal length")
    n_bins = max(1, int(round(length / bin_width)))
    t = (np.arange(n_bins) + 0.5) * bin_width
    shape = np.zeros(n_bins)
    after = t >= t_rec
    for tau, weight in zip(taus, weights):
        shape[after] += weight / tau * np.exp(-(t[after] - t_rec) / tau)
    if ap_total == 0 or shape.sum() == 0:
        return np.zeros(n_bins)
    return ap_total * shape / shape.sum()
