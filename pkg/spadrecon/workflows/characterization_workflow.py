"""
Detector characterization workflow

Runs the fits in the order the data allow: dark data first (background rate,
recovery time, afterpulse profile), then a cw rate sweep (count rates, DEP
fractions, reset time, click-deficit check).
"""

import logging
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from spadrecon.charfit.afterpulse import extract_afterpulse_profile, recovery_time_from_histogram
from spadrecon.charfit.background import fit_background_rate
from spadrecon.charfit.count_rate import fit_count_rate
from spadrecon.charfit.dep import dead_time_consistency, fit_reset_time, measure_dep_fraction
from spadrecon.charfit.schemas import (
    AfterpulseProfile,
    BackgroundFit,
    CharacterizationReport,
    CharfitSettings,
    CountRateFit,
    DeadTimeCheck,
    DepMeasurement,
    ResetTimeFit,
)
from spadrecon.errors import InputError, SpadReconError
from spadrecon.tags.histograms import first_and_n_histogram, full_correlation_histogram
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)

# A labelled dataset: (label, stream)
Dataset = Tuple[str, TimeTagStream]


def _ticks(seconds: Optional[float], tick: float) -> Optional[int]:
    if seconds is None:
        return None
    return max(1, int(round(seconds / tick)))


class CharacterizationWorkflow:
    """
    Characterize a SPAD from one dark record and an optional cw rate sweep

    Intermediate fits stay available as attributes after run().
    """

    def __init__(self,
                 settings: Optional[CharfitSettings] = None,
                 detector: str = "SPAD",
                 seed: int = 0,
                 n_jobs: int = 1):
        self.settings = settings or CharfitSettings()
        self.detector = detector
        self.n_jobs = n_jobs
        self._seeds = iter(np.random.SeedSequence(seed).generate_state(4096).tolist())

        self.steps: List[Dict[str, Any]] = []
        self.background: Optional[BackgroundFit] = None
        self.afterpulse: Optional[AfterpulseProfile] = None
        self.t_rec: Optional[float] = None
        self.t_rec_sigma: Optional[float] = None
        self.count_rates: List[CountRateFit] = []
        self.dep_points: List[DepMeasurement] = []
        self.reset: Optional[ResetTimeFit] = None
        self.dead_time: Optional[DeadTimeCheck] = None

    def run(self,
            dark: Dataset,
            lit: Sequence[Dataset] = (),
            eta0: Optional[float] = None,
            eta0_sigma: Optional[float] = None) -> CharacterizationReport:
        """
        Execute every step the supplied data allow

        Args:
            dark: Labelled dark (background-only) record
            lit: Labelled cw records at distinct count rates
            eta0: Detection efficiency from an external calibration
            eta0_sigma: Its one-sigma uncertainty

        Returns:
            CharacterizationReport; reset-time fields are None with fewer than
            two illuminated records

        Raises:
            InputError, FitError: Re-raised with the dataset label prefixed
        """
        logger.info("=" * 80)
        logger.info(f"Characterization of {self.detector}: dark '{dark[0]}', {len(lit)} cw record(s)")
        logger.info("=" * 80)

        dark_label, dark_stream = dark
        self._execute_step(f"Background rate [{dark_label}]", self._fit_background, dark_stream)
        self._execute_step(f"Recovery time [{dark_label}]", self._fit_recovery_time, dark_stream)
        self._execute_step(f"Afterpulse profile [{dark_label}]", self._fit_afterpulsing, dark_stream)

        p_a_dep = self.afterpulse.within(2.0 * self.t_rec)
        for label, stream in lit:
            self._execute_step(f"Count rate and DEP [{label}]", self._fit_lit, stream, p_a_dep)

        if len(lit) >= 2:
            self._execute_step("Reset time", self._fit_reset, p_a_dep)
            self._execute_step("Click-deficit check", self._check_dead_time, [s for _, s in lit])
        else:
            logger.warning("[CharFit] Fewer than two cw records; reset and dead times unavailable")

        report = self._report(eta0, eta0_sigma)
        logger.info(f"[CharFit] Characterization finished; unavailable: {report.missing_fields() or 'none'}")
        return report

    def _execute_step(self, step_name: str, step_func: Callable, *args) -> Any:
        """
        Execute a step, recording its outcome

        Errors are re-raised with the step name prefixed to the message.
        """
        logger.info(f"[Step] {step_name}...")
        started = time.perf_counter()
        try:
            result = step_func(*args)
        except SpadReconError as exc:
            self.steps.append({"name": step_name, "success": False, "error": str(exc)})
            logger.error(f"  {step_name} failed: {exc}")
            exc.args = (f"{step_name}: {exc}",)
            raise
        self.steps.append({"name": step_name, "success": True, "seconds": time.perf_counter() - started})
        return result

    def _next_seed(self) -> int:
        return next(self._seeds)

    # Dark data

    def _fit_background(self, stream: TimeTagStream) -> BackgroundFit:
        settings = self.settings
        hist = full_correlation_histogram(
            stream,
            bin_width=settings.background_bin_ticks,
            max_delay=_ticks(settings.background_max_delay, stream.tick_duration),
            n_jobs=self.n_jobs,
        )
        self.background = fit_background_rate(hist, fit_start=settings.tail_start,
                                              n_bootstrap=settings.n_bootstrap, method=settings.background_fit,
                                              seed=self._next_seed(), n_jobs=self.n_jobs)
        return self.background

    def _fit_recovery_time(self, stream: TimeTagStream) -> float:
        settings = self.settings
        hist = first_and_n_histogram(stream, 2, bin_width=settings.recovery_bin_ticks,
                                     max_delay=_ticks(settings.recovery_max_delay, stream.tick_duration),
                                     n_jobs=self.n_jobs)
        self.t_rec = recovery_time_from_histogram(hist)
        self.t_rec_sigma = hist.bin_seconds / 2.0
        logger.info(f"[CharFit] t_rec = {self.t_rec * 1e9:.4g} ns from the first nonzero bin")
        return self.t_rec

    def _fit_afterpulsing(self, stream: TimeTagStream) -> AfterpulseProfile:
        settings = self.settings
        hist = first_and_n_histogram(stream, 2, bin_width=settings.bin_ticks,
                                     max_delay=_ticks(settings.ap_max_delay, stream.tick_duration),
                                     n_jobs=self.n_jobs)
        self.afterpulse = extract_afterpulse_profile(
            hist, self.background.r_b, self.t_rec, r_b_sigma=self.background.sigma,
            fit_start=settings.tail_start, n_bootstrap=settings.n_bootstrap,
            seed=self._next_seed(), n_jobs=self.n_jobs,
        )
        return self.afterpulse

    # cw rate sweep

    def _fit_lit(self, stream: TimeTagStream, p_a_dep: float) -> DepMeasurement:
        settings = self.settings
        max_delay = _ticks(settings.lit_max_delay, stream.tick_duration)

        def histogram(n: int):
            return first_and_n_histogram(stream, n, bin_width=settings.bin_ticks, max_delay=max_delay,
                                         n_jobs=self.n_jobs)

        peak = histogram(3).peak_delay()
        rate_fit = fit_count_rate(histogram(settings.count_rate_order), tau_r=self.t_rec, peak_delay=peak,
                                  n_bootstrap=settings.n_bootstrap, seed=self._next_seed(), n_jobs=self.n_jobs)
        self.count_rates.append(rate_fit)
        point = measure_dep_fraction(histogram(2), rate_fit.rate, p_a_dep, self.t_rec,
                                     r_sigma=rate_fit.rate_sigma, n_bootstrap=settings.n_bootstrap,
                                     seed=self._next_seed(), n_jobs=self.n_jobs)
        self.dep_points.append(point)
        return point

    def _fit_reset(self, p_a_dep: float) -> ResetTimeFit:
        self.reset = fit_reset_time(self.dep_points, p_a_dep, max_rate=self.settings.linear_rate_limit)
        return self.reset

    def _check_dead_time(self, streams: List[TimeTagStream]) -> DeadTimeCheck:
        rates = [fit.rate for fit in self.count_rates]
        self.dead_time = dead_time_consistency(streams, rates, self.afterpulse.p_total,
                                               self.reset.t_reset, self.reset.sigma)
        return self.dead_time

    def _report(self, eta0: Optional[float], eta0_sigma: Optional[float]) -> CharacterizationReport:
        two_trec = 2.0 * self.t_rec
        values: Dict[str, Any] = dict(
            detector=self.detector,
            eta0=eta0,
            eta0_sigma=eta0_sigma if eta0 is not None else None,
            r_b=self.background.r_b,
            r_b_sigma=self.background.sigma,
            ap_total=self.afterpulse.p_total,
            ap_total_sigma=self.afterpulse.sigma,
            p_a_2trec=self.afterpulse.within(two_trec),
            p_a_2trec_sigma=self.afterpulse.sigma_within(two_trec),
            t_rec=self.t_rec,
            t_rec_sigma=self.t_rec_sigma,
            ap_profile=self.afterpulse.profile,
            ap_bin_width=self.afterpulse.bin_width,
        )
        if self.reset is not None:
            values.update(
                t_reset=self.reset.t_reset,
                t_reset_sigma=self.reset.sigma,
                t_dead=self.t_rec - self.reset.t_reset,
                t_dead_sigma=float(np.hypot(self.t_rec_sigma, self.reset.sigma)),
            )
        if self.dead_time is not None:
            values.update(t_rec_check=self.dead_time.t_rec_check, t_rec_check_sigma=self.dead_time.sigma)
        return CharacterizationReport(**values)


def characterize_detector(
    dark: Dataset,
    lit: Sequence[Dataset] = (),
    settings: Optional[CharfitSettings] = None,
    eta0: Optional[float] = None,
    eta0_sigma: Optional[float] = None,
    detector: str = "SPAD",
    seed: int = 0,
    n_jobs: int = 1,
) -> CharacterizationReport:
    """
    Characterize a detector from labelled dark and cw records

    Raises:
        InputError: If the dark record is missing
    """
    if dark is None:
        raise InputError("A dark record is required for characterization")
    workflow = CharacterizationWorkflow(settings=settings, detector=detector, seed=seed, n_jobs=n_jobs)
    return workflow.run(dark, lit, eta0=eta0, eta0_sigma=eta0_sigma)
