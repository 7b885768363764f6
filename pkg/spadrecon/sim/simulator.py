"""
Monte Carlo SPAD click simulator

Per cycle: draw the photon number, draw arrival times from the photon
profile, thin by eta0, superpose background, run the recovery state machine
and add afterpulses. Click times are floored to ticks; clicks past the cycle
end and second clicks in an occupied tick are dropped and tallied.

Recovery state machine (times relative to the most recent click c):
    - tau >= t_rec with nothing pending: armed click at the event time
    - tau < t_rec: lost with probability D(tau); a survivor makes a twilight
      click pending (further survivors merge into it)
    - a pending twilight click fires at c + t_rec and becomes the new c
"""

import heapq
import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from spadrecon.core.profiles import LossProfileModel
from spadrecon.errors import InputError
from spadrecon.sim.schemas import SimConfig, SimMode, SimTallies
from spadrecon.tags.stream import TimeTagStream
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)

AP_PROBABILITY_CAP = 0.999


@dataclass
class SimResult:
    stream: TimeTagStream
    tallies: SimTallies


class _Detector:
    """Recovery state machine plus afterpulsing for one configuration"""

    def __init__(self, cfg: SimConfig):
        params = cfg.detector
        self.loss: LossProfileModel = cfg.loss_model()
        self.t_rec = self.loss.t_rec
        self.mode = cfg.mode
        self.ap_total = params.ap_total
        self.ap_inflation = cfg.ap_inflation
        self.ap_memory = cfg.ap_memory
        profile = np.clip(params.ap_profile_array(), 0.0, None)
        self.ap_bin_width = params.ap_bin_width
        self.ap_cdf = np.cumsum(profile) / profile.sum() if profile.size and profile.sum() > 0 else None

    def _ap_delay(self, rng: np.random.Generator) -> float:
        if self.ap_cdf is None:
            return self.t_rec
        index = int(np.searchsorted(self.ap_cdf, rng.random(), side="right"))
        return (min(index, self.ap_cdf.size - 1) + rng.random()) * self.ap_bin_width

    def _loss_draw(self, tau: float, rng: np.random.Generator) -> bool:
        return rng.random() < float(self.loss.evaluate(tau))

    def run(self, events: np.ndarray, rng: np.random.Generator, tallies: SimTallies) -> List[float]:
        if self.mode == SimMode.PHYSICAL:
            return self._run_physical(events, rng, tallies)
        clicks = self._recover(events, rng, tallies)
        if self.ap_total > 0:
            clicks = self._faithful_afterpulses(clicks, rng, tallies)
        return clicks

    def _recover(self, events, rng, tallies) -> List[float]:
        clicks: List[float] = []
        last = -np.inf
        pending = False
        for t in events:
            if pending and t >= last + self.t_rec:
                last += self.t_rec
                clicks.append(last)
                tallies.twilight_clicks += 1
                pending = False
            tau = t - last
            if tau >= self.t_rec:
                last = t
                clicks.append(t)
                tallies.armed_clicks += 1
            elif self._loss_draw(tau, rng):
                tallies.dead_time_losses += 1
            elif pending:
                tallies.twilight_merged += 1
            else:
                pending = True
        if pending:
            clicks.append(last + self.t_rec)
            tallies.twilight_clicks += 1
        return clicks

    def _faithful_afterpulses(self, clicks, rng, tallies) -> List[float]:
        """Geometric chain per click, independent of detector state"""
        afterpulses = []
        for click in clicks:
            t = click
            while rng.random() < self.ap_total:
                t += self._ap_delay(rng)
                afterpulses.append(t)
        tallies.afterpulse_clicks += len(afterpulses)
        return sorted(clicks + afterpulses)

    def _ap_probability(self, now: float, recent: deque) -> float:
        while recent and recent[0] <= now - self.ap_memory:
            recent.popleft()
        return min(self.ap_total * (1.0 + self.ap_inflation * len(recent)), AP_PROBABILITY_CAP)

    def _run_physical(self, events, rng, tallies) -> List[float]:
        """Afterpulses enter the state machine: blocked inside t_rec of the latest click"""
        clicks: List[float] = []
        recent: deque = deque()
        queue: List[Tuple[float, int]] = []  # (time, kind); kind 0 photon, 1 afterpulse
        for t in events:
            heapq.heappush(queue, (float(t), 0))
        last = -np.inf
        pending = False

        def register(t: float):
            clicks.append(t)
            recent.append(t)
            if self.ap_total > 0 and rng.random() < self._ap_probability(t, recent):
                heapq.heappush(queue, (t + self._ap_delay(rng), 1))

        while queue or pending:
            if not queue or (pending and queue[0][0] >= last + self.t_rec):
                last += self.t_rec
                pending = False
                tallies.twilight_clicks += 1
                register(last)
                continue
            t, kind = heapq.heappop(queue)
            tau = t - last
            if kind == 1:
                if tau >= self.t_rec and not pending:
                    last = t
                    tallies.afterpulse_clicks += 1
                    register(t)
                else:
                    tallies.afterpulses_blocked += 1
            elif tau >= self.t_rec:
                last = t
                tallies.armed_clicks += 1
                register(t)
            elif self._loss_draw(tau, rng):
                tallies.dead_time_losses += 1
            elif pending:
                tallies.twilight_merged += 1
            else:
                pending = True
        return sorted(clicks)


def _to_ticks(clicks: List[float], tick: float, cycle_ticks: int, tallies: SimTallies) -> np.ndarray:
    ticks = np.floor(np.asarray(clicks, dtype=float) / tick).astype(np.int64)
    inside = ticks[(ticks >= 0) & (ticks < cycle_ticks)]
    tallies.clicks_past_end += ticks.size - inside.size
    unique = np.unique(inside)
    tallies.same_tick_merges += inside.size - unique.size
    return unique


def _sample_arrivals(rng, masses_cdf, n, bin_width, start) -> np.ndarray:
    bins = np.searchsorted(masses_cdf, rng.random(n), side="right")
    bins = np.minimum(bins, masses_cdf.size - 1)
    return start + (bins + rng.random(n)) * bin_width


def _simulate_partition(cfg: SimConfig, seed: np.random.SeedSequence, n_cycles: int,
                        cycle_length: float) -> Tuple[List[np.ndarray], SimTallies]:
    rng = np.random.Generator(np.random.Philox(seed))
    detector = _Detector(cfg)
    tallies = SimTallies()
    tick = cfg.detector.tick_duration
    cycle_ticks = int(round(cycle_length / tick))
    masses = cfg.profile.bin_masses()
    cdf = np.cumsum(masses)
    photon_counts = cfg.source.sample(rng, n_cycles)
    background_mean = cfg.detector.r_b * cycle_length

    cycles = []
    for n_photons in photon_counts:
        n_photons = int(n_photons)
        tallies.photons += n_photons
        arrivals = _sample_arrivals(rng, cdf, n_photons, cfg.profile.bin_width, cfg.profile.start)
        detected = arrivals[rng.random(n_photons) < cfg.detector.eta0]
        tallies.efficiency_losses += n_photons - detected.size
        n_background = int(rng.poisson(background_mean))
        tallies.background_events += n_background
        background = rng.random(n_background) * cycle_length
        events = np.sort(np.concatenate([detected, background]))
        clicks = detector.run(events, rng, tallies)
        cycles.append(_to_ticks(clicks, tick, cycle_ticks, tallies))
    return cycles, tallies


def simulate_with_tallies(cfg: SimConfig) -> SimResult:
    """
    Run the pulsed simulation and return the stream with its event tallies

    Cycles are split into partitions of cfg.partition_cycles; partition i
    draws from Philox seeded by the i-th child of SeedSequence(cfg.seed), so
    the output depends on the seed and partition size only.
    """
    started = time.perf_counter()
    if cfg.profile.values.sum() <= 0:
        raise InputError("Photon profile is identically zero")
    cycle_length = cfg.resolved_cycle_length()
    sizes = [min(cfg.partition_cycles, cfg.cycles - i) for i in range(0, cfg.cycles, cfg.partition_cycles)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    if cfg.n_jobs == 1 or len(sizes) == 1:
        parts = [_simulate_partition(cfg, seed, size, cycle_length) for seed, size in zip(seeds, sizes)]
    else:
        parts = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_simulate_partition)(cfg, seed, size, cycle_length) for seed, size in zip(seeds, sizes)
        )

    cycles: List[np.ndarray] = []
    tallies = SimTallies()
    for index, (part_cycles, part_tallies) in enumerate(parts):
        cycles.extend(part_cycles)
        tallies = tallies + part_tallies
        logger.debug(f"[Sim] partition {index} done ({len(part_cycles)} cycles)")

    stream = TimeTagStream(cycles=tuple(cycles), tick_duration=cfg.detector.tick_duration,
                           cycle_length=int(round(cycle_length / cfg.detector.tick_duration)))
    elapsed = time.perf_counter() - started
    track_stage("sim", f"{cfg.mode.value} {cfg.source.describe()} x{cfg.cycles}", elapsed)
    logger.info(f"[Sim] {cfg.cycles} cycles, {stream.total_clicks} clicks in {elapsed:.1f}s")
    return SimResult(stream=stream, tallies=tallies)


def simulate(cfg: SimConfig) -> TimeTagStream:
    """Simulated time tags for a pulsed experiment (see simulate_with_tallies)"""
    return simulate_with_tallies(cfg).stream


def simulate_cw(cfg: SimConfig, rate: float, duration: float, return_tallies: bool = False):
    """
    Homogeneous Poisson light at `rate` photons/s for `duration` seconds

    cfg supplies the detector, loss model, mode and seed; its profile and
    source are ignored. Photons are thinned by eta0 and background is added,
    so the detected-event rate is eta0 * rate + r_b; rate 0 gives a dark
    record. The result is a single continuous record.
    """
    if rate < 0 or duration <= 0:
        raise InputError(f"cw simulation needs rate >= 0 and duration > 0, got {rate}, {duration}")
    started = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    detector = _Detector(cfg)
    tallies = SimTallies()
    tick = cfg.detector.tick_duration

    n_photons = int(rng.poisson(rate * duration))
    tallies.photons = n_photons
    arrivals = rng.random(n_photons) * duration
    detected = arrivals[rng.random(n_photons) < cfg.detector.eta0]
    tallies.efficiency_losses = n_photons - detected.size
    n_background = int(rng.poisson(cfg.detector.r_b * duration))
    tallies.background_events = n_background
    events = np.sort(np.concatenate([detected, rng.random(n_background) * duration]))

    clicks = detector.run(events, rng, tallies)
    cycle_ticks = int(round(duration / tick))
    ticks = _to_ticks(clicks, tick, cycle_ticks, tallies)
    stream = TimeTagStream(cycles=(ticks,), tick_duration=tick, cycle_length=cycle_ticks, continuous=True)
    track_stage("sim", f"cw {rate:.3g}/s x {duration:g}s", time.perf_counter() - started)
    logger.info(f"[Sim] cw record: {stream.total_clicks} clicks over {duration:g}s")
    if return_tallies:
        return SimResult(stream=stream, tallies=tallies)
    return stream
