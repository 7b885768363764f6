"""
Detector and window schemas

Serializable parameter records shared by every subpackage.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from spadrecon.core.profiles import LossProfileModel, hyperexponential_afterpulse_profile

# Time tagger resolution and the default analysis bin (6 ticks, about 1 ns)
TICK_DURATION = 164.6e-12
DEFAULT_BIN_TICKS = 6
DEFAULT_BIN_WIDTH = DEFAULT_BIN_TICKS * TICK_DURATION

AP_SUM_TOLERANCE = 1e-6


# eta0, r_b, ap_total, t_dead, t_reset, t_rec with one-sigma uncertainties
_TABLE = {
    "SPAD1": dict(eta0=(0.633, 0.003), r_b=(137.0, 1.0), ap_total=(0.00602, 0.00002),
                  t_dead=(14.05e-9, 0.08e-9), t_reset=(8.67e-9, 0.02e-9), t_rec=(22.72e-9, 0.08e-9)),
    "SPAD2": dict(eta0=(0.660, 0.003), r_b=(205.0, 1.0), ap_total=(0.02482, 0.00003),
                  t_dead=(13.47e-9, 0.08e-9), t_reset=(8.26e-9, 0.02e-9), t_rec=(21.73e-9, 0.08e-9)),
}


class DetectorParams(BaseModel):
    """Measured SPAD parameters with one-sigma uncertainties"""
    eta0: float = Field(..., ge=0.0, le=1.0, description="Detection efficiency")
    eta0_sigma: float = Field(0.0, ge=0.0, description="One-sigma uncertainty of eta0")
    r_b: float = Field(0.0, ge=0.0, description="Background (dark) count rate in counts/s")
    r_b_sigma: float = Field(0.0, ge=0.0, description="One-sigma uncertainty of r_b")
    ap_total: float = Field(0.0, ge=0.0, lt=1.0, description="Total afterpulse probability")
    ap_total_sigma: float = Field(0.0, ge=0.0, description="One-sigma uncertainty of ap_total")
    ap_profile: List[float] = Field(default_factory=list,
                                    description="Afterpulse probability per delay bin (may hold small negative bins)")
    ap_bin_width: float = Field(6 * TICK_DURATION, gt=0.0, description="Bin width of ap_profile in s")
    t_dead: float = Field(0.0, ge=0.0, description="Dead time in s")
    t_dead_sigma: float = Field(0.0, ge=0.0)
    t_reset: float = Field(0.0, ge=0.0, description="Reset (efficiency ramp) time in s")
    t_reset_sigma: float = Field(0.0, ge=0.0)
    t_rec: float = Field(0.0, ge=0.0, description="Recovery time t_dead + t_reset in s")
    t_rec_sigma: float = Field(0.0, ge=0.0)
    tick_duration: float = Field(TICK_DURATION, gt=0.0, description="Time tagger tick in s")

    class Config:
        json_schema_extra = {
            "example": {
                "eta0": 0.633, "eta0_sigma": 0.003,
                "r_b": 137.0, "r_b_sigma": 1.0,
                "ap_total": 0.00602, "ap_total_sigma": 0.00002,
                "ap_profile": [0.0, 0.0, 0.0012, 0.0009],
                "ap_bin_width": 9.876e-10,
                "t_dead": 1.405e-08, "t_reset": 8.67e-09, "t_rec": 2.272e-08,
                "tick_duration": 1.646e-10
            }
        }

    @model_validator(mode="after")
    def _check_consistency(self):
        if abs(self.t_rec - (self.t_dead + self.t_reset)) > self.tick_duration:
            raise ValueError(
                f"t_rec ({self.t_rec:g}) must equal t_dead + t_reset ({self.t_dead + self.t_reset:g}) within one tick"
            )
        if self.ap_profile:
            profile_sum = float(np.sum(self.ap_profile))
            if abs(profile_sum - self.ap_total) > AP_SUM_TOLERANCE:
                raise ValueError(f"ap_profile sums to {profile_sum:.8g}, expected ap_total={self.ap_total:.8g}")
        return self

    @classmethod
    def from_table(cls, name: str, bin_width: float = DEFAULT_BIN_WIDTH) -> "DetectorParams":
        """
        Preset for one of the two characterized detectors

        The afterpulse profile is a hyperexponential stand-in with the measured
        total probability.

        Raises:
            ValueError: If the detector name is unknown
        """
        key = name.upper()
        if key not in _TABLE:
            raise ValueError(f"Unknown detector '{name}'. Known: {sorted(_TABLE)}")
        row = _TABLE[key]
        values = {}
        for field_name, (value, sigma) in row.items():
            values[field_name] = value
            values[f"{field_name}_sigma"] = sigma
        # t_rec is the measured quantity; keep t_dead + t_reset consistent with it
        values["t_dead"] = values["t_rec"] - values["t_reset"]
        profile = hyperexponential_afterpulse_profile(values["ap_total"], values["t_rec"], bin_width)
        return cls(ap_profile=profile.tolist(), ap_bin_width=bin_width, **values)

    def loss_model(self) -> LossProfileModel:
        return LossProfileModel(t_dead=self.t_dead, t_rec=self.t_rec)

    def ap_profile_array(self) -> np.ndarray:
        return np.asarray(self.ap_profile, dtype=float)

    def with_ap_total(self, ap_total: float) -> "DetectorParams":
        """Copy with the afterpulse probability rescaled, profile scaled along"""
        profile = self.ap_profile_array()
        if self.ap_total > 0 and profile.size:
            profile = profile * (ap_total / self.ap_total)
        return self.model_copy(update={"ap_total": ap_total, "ap_profile": profile.tolist()})

    def without_uncertainties(self) -> "DetectorParams":
        return self.model_copy(update={f"{name}_sigma": 0.0 for name in
                                       ("eta0", "r_b", "ap_total", "t_dead", "t_reset", "t_rec")})


class CycleWindow(BaseModel):
    """Analysis window inside each cycle"""
    t_start: float = Field(0.0, ge=0.0, description="Window start within the cycle in s")
    t_end: float = Field(..., description="Window end within the cycle in s")
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0.0, description="Analysis bin width in s")

    class Config:
        json_schema_extra = {
            "example": {"t_start": 0.0, "t_end": 3e-6, "bin_width": 9.876e-10}
        }

    @model_validator(mode="after")
    def _check_order(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must be > t_start ({self.t_start})")
        return self

    @property
    def n_bins(self) -> int:
        return max(1, int(round((self.t_end - self.t_start) / self.bin_width)))

    @property
    def duration(self) -> float:
        """Window length T on the bin grid"""
        return self.n_bins * self.bin_width

    def tick_bounds(self, tick_duration: float) -> tuple:
        """[start, end) of the window in ticks"""
        start = int(round(self.t_start / tick_duration))
        end = int(round((self.t_start + self.duration) / tick_duration))
        return start, end

    def bin_ticks(self, tick_duration: float) -> Optional[int]:
        """Bin width in whole ticks, or None if it is not a tick multiple"""
        ratio = self.bin_width / tick_duration
        nearest = int(round(ratio))
        if nearest >= 1 and abs(ratio - nearest) < 1e-6:
            return nearest
        return None
