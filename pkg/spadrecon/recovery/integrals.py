"""
Nested-integral evaluation for recovery events

All integrals are evaluated on the photon-profile bin grid. Photons sit at
bin centers; two photons sharing a bin are ordered with weight 1/2, which is
the midpoint rule applied to the inner integral's own bin. The same measure
defines the normalization N_m, so the events of a given photon number
partition it exactly.

An event is split into segments, each led by an ARMED photon at bin s and
followed by the photons that land in the recovery periods it starts. A
segment's non-armed photons only depend on s, so each segment collapses to a
weight w(s) computed by an innermost-first cumulative-sum recursion over the
photon offset from s. Segments chain through suffix sums: the next ARMED
photon starts one recovery time after s, or two recovery times after the
reference of the last twilight photon. Both levels are memoized.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from spadrecon.core.profiles import LossProfileModel, PhotonProfile
from spadrecon.errors import NumericalUnderflowError
from spadrecon.recovery.events import EventString, EventSymbol

logger = logging.getLogger(__name__)

# (symbol, recovery-period index counted from the segment's ARMED photon)
Signature = Tuple[Tuple[EventSymbol, int], ...]


def segment_signatures(event: EventString) -> Tuple[Signature, ...]:
    """Split an event into ARMED-led segments"""
    segments: List[List[Tuple[EventSymbol, int]]] = []
    period = 0
    for group in event.groups:
        if group[0] == EventSymbol.ARMED:
            segments.append([])
            period = 0
            members = group[1:]
        else:
            period += 1
            members = group
        segments[-1].extend((symbol, period) for symbol in members)
    return tuple(tuple(segment) for segment in segments)


def next_armed_shift(signature: Signature) -> int:
    """Start of the next ARMED photon after this segment, in recovery times from its ARMED photon"""
    for symbol, period in reversed(signature):
        if symbol == EventSymbol.TWILIGHT:
            return period + 2
    return 1


class EventIntegrator:
    """
    Evaluates event probabilities for one photon profile and loss model

    Instances hold per-profile caches; build one per worker.
    """

    def __init__(self, profile: PhotonProfile, loss: LossProfileModel):
        self.profile = profile
        self.loss = loss
        self.masses = profile.bin_masses()
        self.n_bins = profile.n_bins
        self.window_bins, self.loss_values = loss.discretize(profile.bin_width)
        self._segment_cache: Dict[Signature, np.ndarray] = {}
        self._chain_cache: Dict[Tuple[Signature, ...], np.ndarray] = {}
        self._norm_cache: List[np.ndarray] = []

    def clear_cache(self):
        self._segment_cache.clear()
        self._chain_cache.clear()

    def normalization(self, n_photons: int) -> float:
        """N_m: the ordered n-fold integral of gamma on the grid"""
        if not self._norm_cache:
            self._norm_cache.append(self.masses.copy())
        while len(self._norm_cache) < n_photons:
            previous = self._norm_cache[-1]
            self._norm_cache.append(self.masses * (np.cumsum(previous) - 0.5 * previous))
        return float(self._norm_cache[n_photons - 1].sum())

    def probability(self, event: EventString) -> float:
        norm = self.normalization(event.photon_count)
        if not norm > 0:
            raise NumericalUnderflowError(
                f"Normalization N_{event.photon_count} vanished; the photon profile is zero or too sparse"
            )
        if self.window_bins == 0:
            return 1.0 if event.non_armed_count == 0 else 0.0
        weight = self._chain(segment_signatures(event)).sum()
        return float(min(max(weight / norm, 0.0), 1.0))

    def _chain(self, signatures: Tuple[Signature, ...]) -> np.ndarray:
        cached = self._chain_cache.get(signatures)
        if cached is not None:
            return cached
        weight = self._segment_weight(signatures[0])
        if len(signatures) > 1:
            rest = self._chain(signatures[1:])
            suffix = np.concatenate([np.cumsum(rest[::-1])[::-1], [0.0]])
            shift = next_armed_shift(signatures[0]) * self.window_bins
            start = np.minimum(np.arange(self.n_bins) + shift, self.n_bins)
            weight = weight * suffix[start]
        self._chain_cache[signatures] = weight
        return weight

    def _segment_weight(self, signature: Signature) -> np.ndarray:
        """w(s): the ARMED photon at s times everything inside its recovery periods"""
        cached = self._segment_cache.get(signature)
        if cached is not None:
            return cached
        if not signature:
            self._segment_cache[signature] = self.masses
            return self.masses

        k_bins = self.window_bins
        span = (signature[-1][1] + 1) * k_bins
        padded = np.concatenate([self.masses, np.zeros(span)])
        offsets = np.arange(self.n_bins)[:, None] + np.arange(span)[None, :]
        masses = padded[offsets]

        # inner[s, u]: weight of the photons after the current one, given it sits at offset u
        inner = np.ones((self.n_bins, span))
        for index in range(len(signature) - 1, -1, -1):
            symbol, period = signature[index]
            lo, hi = period * k_bins, (period + 1) * k_bins
            factor = self.loss_values if symbol == EventSymbol.LOST else 1.0 - self.loss_values
            term = np.zeros((self.n_bins, span))
            term[:, lo:hi] = masses[:, lo:hi] * factor[None, :] * inner[:, lo:hi]
            opens_period = index > 0 and period > signature[index - 1][1]
            if opens_period:
                # starts at the twilight click, after every earlier photon
                inner = np.repeat(term[:, lo:hi].sum(axis=1)[:, None], span, axis=1)
            else:
                inner = np.cumsum(term[:, ::-1], axis=1)[:, ::-1] - 0.5 * term

        weight = self.masses * inner[:, 0]
        self._segment_cache[signature] = weight
        return weight


def event_probability(event: EventString, profile: PhotonProfile, loss: LossProfileModel) -> float:
    """
    Probability of one event given n photons drawn from the profile

    Args:
        event: Disambiguated event
        profile: Photon profile gamma over the window T
        loss: Recovery loss profile D

    Returns:
        The event's nested integral divided by N_m, in [0, 1]

    Raises:
        NumericalUnderflowError: If the profile is identically zero
    """
    return EventIntegrator(profile, loss).probability(event)


def normalization_constant(profile: PhotonProfile, n_photons: int) -> float:
    """N_m for the normalized profile (1/2 for two photons)"""
    return EventIntegrator(profile, LossProfileModel.ideal()).normalization(n_photons)
