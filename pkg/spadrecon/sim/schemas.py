"""
Simulator configuration and bookkeeping
"""

from dataclasses import dataclass, fields
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from spadrecon.core.profiles import (
    LossProfileModel,
    PhotonProfile,
    flat_profile,
    gaussian_profile,
    square_pulse_profile,
)
from spadrecon.core.schemas import DEFAULT_BIN_WIDTH, DetectorParams
from spadrecon.errors import ConfigError
from spadrecon.sim.sources import PhotonSource, source_from_spec

DEFAULT_PARTITION_CYCLES = 10_000


class SimMode(str, Enum):
    """FAITHFUL follows the detector model exactly; PHYSICAL routes afterpulses through the detector"""
    FAITHFUL = "faithful"
    PHYSICAL = "physical"


class SimConfig(BaseModel):
    """Everything one simulation run depends on"""
    detector: DetectorParams = Field(..., description="Detector parameters")
    profile: PhotonProfile = Field(..., description="Photon profile; photons land at profile.start + offset")
    source: PhotonSource = Field(..., description="Per-cycle photon-number source")
    cycles: int = Field(..., ge=1, description="Number of experimental cycles")
    mode: SimMode = Field(SimMode.FAITHFUL, description="Afterpulse handling")
    seed: int = Field(0, ge=0, description="Root seed")
    loss: Optional[LossProfileModel] = Field(None, description="Loss profile D; defaults to the detector's")
    cycle_length: Optional[float] = Field(None, gt=0.0,
                                          description="Cycle length in s; defaults to window end + t_rec + 1 us")
    partition_cycles: int = Field(DEFAULT_PARTITION_CYCLES, ge=1, description="Cycles per seeded partition")
    ap_inflation: float = Field(0.0, ge=0.0, description="PHYSICAL mode: afterpulse boost per recent click")
    ap_memory: float = Field(1e-6, gt=0.0, description="PHYSICAL mode: look-back for recent clicks in s")
    n_jobs: int = Field(1, description="joblib workers over partitions")

    class Config:
        arbitrary_types_allowed = True

    def loss_model(self) -> LossProfileModel:
        return self.loss if self.loss is not None else self.detector.loss_model()

    def resolved_cycle_length(self) -> float:
        if self.cycle_length is not None:
            return self.cycle_length
        return self.profile.start + self.profile.duration + self.loss_model().t_rec + 1e-6


class SimSpec(BaseModel):
    """Serializable description of a simulation (the [sim] config section)"""
    source: str = Field("poisson", description="poisson, fock or drift")
    nbar: float = Field(5.0, ge=0.0, description="Mean photon number")
    weights: List[float] = Field(default_factory=list, description="Fock-mixture weights")
    drift: float = Field(0.0, ge=0.0, le=1.0, description="Relative drift of the mean")
    pulse: str = Field("flat", description="flat, gaussian or square")
    window: float = Field(3e-6, gt=0.0, description="Photon window duration in s")
    window_start: float = Field(0.0, ge=0.0, description="Window offset in the cycle in s")
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0.0, description="Profile bin width in s")
    pulse_center: float = Field(1.5e-6, description="Gaussian center within the window in s")
    pulse_fwhm: float = Field(0.5e-6, gt=0.0, description="Gaussian FWHM in s")
    pulse_start: float = Field(0.0, ge=0.0, description="Square pulse start within the window in s")
    pulse_length: float = Field(1.5e-6, gt=0.0, description="Square pulse length in s")
    cycles: int = Field(100_000, ge=1)
    mode: SimMode = Field(SimMode.FAITHFUL)
    ap_inflation: float = Field(0.0, ge=0.0)
    record: str = Field("pulsed", description="pulsed, cw or dark (cw at zero photon rate)")
    cw_rate: float = Field(0.0, ge=0.0, description="cw photon rate in 1/s")
    cw_duration: float = Field(0.01, gt=0.0, description="cw record length in s")

    class Config:
        json_schema_extra = {
            "example": {"source": "poisson", "nbar": 5.0, "pulse": "flat", "window": 3e-6,
                        "cycles": 300000, "mode": "faithful"}
        }

    def build_profile(self) -> PhotonProfile:
        if self.pulse == "flat":
            return flat_profile(self.window, self.bin_width, self.window_start)
        if self.pulse == "gaussian":
            return gaussian_profile(self.window, self.bin_width, self.pulse_center, self.pulse_fwhm,
                                    self.window_start)
        if self.pulse == "square":
            return square_pulse_profile(self.window, self.bin_width, self.pulse_start, self.pulse_length,
                                        self.window_start)
        raise ConfigError(f"Unknown pulse shape '{self.pulse}' (use flat, gaussian or square)")

    def to_config(self, detector: DetectorParams, seed: int = 0, n_jobs: int = 1) -> SimConfig:
        return SimConfig(
            detector=detector,
            profile=self.build_profile(),
            source=source_from_spec(self.source, self.nbar, self.weights, self.drift),
            cycles=self.cycles,
            mode=self.mode,
            seed=seed,
            ap_inflation=self.ap_inflation,
            n_jobs=n_jobs,
        )


@dataclass
class SimTallies:
    """Event bookkeeping of a run; every incident event ends in exactly one bucket"""
    photons: int = 0
    efficiency_losses: int = 0
    background_events: int = 0
    dead_time_losses: int = 0
    twilight_merged: int = 0
    armed_clicks: int = 0
    twilight_clicks: int = 0
    afterpulse_clicks: int = 0
    afterpulses_blocked: int = 0
    clicks_past_end: int = 0
    same_tick_merges: int = 0

    def __add__(self, other: "SimTallies") -> "SimTallies":
        return SimTallies(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    @property
    def clicks(self) -> int:
        return self.armed_clicks + self.twilight_clicks + self.afterpulse_clicks

    @property
    def recorded_clicks(self) -> int:
        return self.clicks - self.clicks_past_end - self.same_tick_merges

    def is_conserved(self, stream_clicks: Optional[int] = None) -> bool:
        """Incident events and clicks both balance exactly"""
        incident = self.photons + self.background_events
        outcomes = (self.efficiency_losses + self.dead_time_losses + self.twilight_merged
                    + self.armed_clicks + self.twilight_clicks)
        balanced = incident == outcomes
        if stream_clicks is not None:
            balanced = balanced and stream_clicks == self.recorded_clicks
        return balanced

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
