"""
Characterization fit results and the detector characterization report
"""

import json
import os
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from spadrecon.core.schemas import DEFAULT_BIN_WIDTH, TICK_DURATION, DetectorParams
from spadrecon.errors import InputError


class CountRateFit(BaseModel):
    """Count rate from a first-and-n histogram"""
    rate: float = Field(..., gt=0.0, description="Fitted count rate r in counts/s")
    rate_sigma: float = Field(0.0, ge=0.0, description="Bootstrap one-sigma of r")
    p_a_fit: float = Field(..., description="Fitted first-order afterpulse term (reported, not used downstream)")
    p_a_fit_sigma: float = Field(0.0, ge=0.0, description="Covariance-based one-sigma of p_a_fit")
    tau_r_constraint: float = Field(..., ge=0.0, description="Recovery time held fixed in the fit, s")
    fit_start: float = Field(..., ge=0.0, description="First delay included in the fit, s")
    n: int = Field(..., ge=2, description="Histogram order")
    covariance: List[List[float]] = Field(default_factory=list, description="Covariance of (r, p_a)")
    n_bins_fit: int = Field(0, ge=0, description="Bins used in the fit")

    class Config:
        json_schema_extra = {
            "example": {
                "rate": 2.2e7, "rate_sigma": 1.1e4, "p_a_fit": 0.004, "p_a_fit_sigma": 0.002,
                "tau_r_constraint": 2.27e-8, "fit_start": 1.2e-7, "n": 6,
                "covariance": [[1.2e8, 0.1], [0.1, 4e-6]], "n_bins_fit": 512
            }
        }


class BackgroundFit(BaseModel):
    """Background rate from the linear tail of a full correlation histogram"""
    r_b: float = Field(..., ge=0.0, description="Background count rate in counts/s")
    sigma: float = Field(0.0, ge=0.0, description="Bootstrap one-sigma of r_b")
    fit_start: float = Field(..., ge=0.0, description="First delay in the fit, s")
    collection_time: float = Field(..., gt=0.0, description="Data collection time t0, s")


class AfterpulseProfile(BaseModel):
    """Normalized afterpulse profile a(tau) per delay bin"""
    profile: List[float] = Field(..., description="Afterpulse probability per bin (negative noise bins kept)")
    bin_width: float = Field(..., gt=0.0, description="Bin width in s")
    p_total: float = Field(..., description="Sum of the profile")
    sigma: float = Field(0.0, ge=0.0, description="Bootstrap one-sigma of p_total")
    amplitude: float = Field(..., description="Fitted background amplitude in counts per bin at zero delay")
    t_rec: float = Field(..., ge=0.0, description="Recovery time whose bins were zeroed, s")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.profile, dtype=float)

    def within(self, t: float) -> float:
        """Afterpulse probability at delays below t"""
        bins = int(np.floor(t / self.bin_width + 1e-9))
        return float(self.as_array()[:max(bins, 0)].sum())

    def fraction_within(self, t: float) -> float:
        """Share of the whole afterpulse feature at delays below t"""
        if self.p_total == 0:
            raise InputError("Afterpulse profile sums to zero")
        return self.within(t) / self.p_total

    def sigma_within(self, t: float) -> float:
        """Uncertainty over [0, t), scaled from the total by the probability fraction"""
        return self.sigma * abs(self.fraction_within(t)) if self.p_total else 0.0


class DepMeasurement(BaseModel):
    """Fraction of clicks in the detector effects peak at one count rate"""
    rate: float = Field(..., gt=0.0, description="Count rate r in counts/s")
    dep_fraction: float = Field(..., ge=0.0, le=1.0, description="DEP clicks per click")
    sigma: float = Field(0.0, ge=0.0, description="Quadrature of count and background-slope terms")

    class Config:
        json_schema_extra = {"example": {"rate": 1.0e6, "dep_fraction": 0.0102, "sigma": 0.0001}}


class ResetTimeFit(BaseModel):
    """Reset time from the low-rate slope of the DEP fraction"""
    t_reset: float = Field(..., description="Reset time in s")
    sigma: float = Field(0.0, ge=0.0, description="One-sigma, scaled to unit reduced chi2")
    slope: float = Field(..., description="DEP fraction per count rate, s")
    p_a: float = Field(..., description="Fixed intercept")
    max_rate: float = Field(..., description="Rate cut of the linear fit")
    n_points: int = Field(..., ge=2, description="Points used in the linear fit")
    residuals: List[float] = Field(default_factory=list,
                                   description="Data minus the saturating model, all points")


class DeadTimeCheck(BaseModel):
    """Recovery time recovered from the click deficit of a rate sweep"""
    t_rec_check: float = Field(..., description="Recovery time estimate in s")
    sigma: float = Field(0.0, ge=0.0)
    mean_loss_time: float = Field(..., description="Fitted (t_rec + t_dead) / 2 in s")
    rates: List[float] = Field(default_factory=list)
    p_lost: List[float] = Field(default_factory=list)


class ShapeFactor(BaseModel):
    """Pulsed-to-cw click ratio inside the analysis window"""
    f_s: float = Field(..., description="Background-subtracted pulsed / cw clicks")
    sigma: float = Field(0.0, ge=0.0)
    n_pulsed: int = Field(..., ge=0)
    n_cw: int = Field(..., ge=0)
    n_background: float = Field(..., ge=0.0)


class CharacterizationReport(BaseModel):
    """Detector characterization in the columns of the published parameter table

    Fields that could not be measured from the supplied data stay None.
    """
    detector: str = Field("SPAD", description="Detector label")
    eta0: Optional[float] = Field(None, description="Detection efficiency (supplied externally)")
    eta0_sigma: Optional[float] = None
    r_b: Optional[float] = Field(None, description="Background rate in counts/s")
    r_b_sigma: Optional[float] = None
    ap_total: Optional[float] = Field(None, description="Total afterpulse probability")
    ap_total_sigma: Optional[float] = None
    p_a_2trec: Optional[float] = Field(None, description="Afterpulse probability within two recovery times")
    p_a_2trec_sigma: Optional[float] = None
    t_dead: Optional[float] = Field(None, description="Dead time in s")
    t_dead_sigma: Optional[float] = None
    t_reset: Optional[float] = Field(None, description="Reset time in s")
    t_reset_sigma: Optional[float] = None
    t_rec: Optional[float] = Field(None, description="Recovery time in s")
    t_rec_sigma: Optional[float] = None
    t_rec_check: Optional[float] = Field(None, description="Recovery time from the click deficit")
    t_rec_check_sigma: Optional[float] = None
    ap_profile: List[float] = Field(default_factory=list)
    ap_bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0.0)
    tick_duration: float = Field(TICK_DURATION, gt=0.0)

    class Config:
        json_schema_extra = {
            "example": {
                "detector": "SPAD1", "eta0": 0.633, "eta0_sigma": 0.003,
                "r_b": 137.0, "r_b_sigma": 1.0, "ap_total": 0.00602, "ap_total_sigma": 0.00002,
                "p_a_2trec": 0.0051, "p_a_2trec_sigma": 0.00002,
                "t_dead": 1.405e-08, "t_dead_sigma": 8e-11, "t_reset": 8.67e-09, "t_reset_sigma": 2e-11,
                "t_rec": 2.272e-08, "t_rec_sigma": 8e-11
            }
        }

    def missing_fields(self) -> List[str]:
        return [name for name in ("eta0", "r_b", "ap_total", "t_dead", "t_reset", "t_rec")
                if getattr(self, name) is None]

    def to_detector_params(self, eta0: Optional[float] = None, sigma_eta0: Optional[float] = None) -> DetectorParams:
        """
        Turn the report into reconstruction inputs

        Raises:
            InputError: If a required field is unavailable
        """
        eta0 = eta0 if eta0 is not None else self.eta0
        sigma_eta0 = sigma_eta0 if sigma_eta0 is not None else (self.eta0_sigma or 0.0)
        missing = [name for name in self.missing_fields() if name != "eta0"]
        if eta0 is None:
            missing.insert(0, "eta0")
        if missing:
            raise InputError(f"Characterization lacks {missing}")
        return DetectorParams(
            eta0=eta0, eta0_sigma=sigma_eta0,
            r_b=self.r_b, r_b_sigma=self.r_b_sigma or 0.0,
            ap_total=self.ap_total, ap_total_sigma=self.ap_total_sigma or 0.0,
            ap_profile=self.ap_profile, ap_bin_width=self.ap_bin_width,
            t_dead=self.t_dead, t_dead_sigma=self.t_dead_sigma or 0.0,
            t_reset=self.t_reset, t_reset_sigma=self.t_reset_sigma or 0.0,
            t_rec=self.t_rec, t_rec_sigma=self.t_rec_sigma or 0.0,
            tick_duration=self.tick_duration,
        )

    def format_table(self) -> str:
        """Human-readable table with one row per parameter"""
        rows = [
            ("eta0", self.eta0, self.eta0_sigma, 1.0, ""),
            ("r_b", self.r_b, self.r_b_sigma, 1.0, "counts/s"),
            ("ap_total", self.ap_total, self.ap_total_sigma, 1.0, ""),
            ("p_a (2 t_rec)", self.p_a_2trec, self.p_a_2trec_sigma, 1.0, ""),
            ("t_dead", self.t_dead, self.t_dead_sigma, 1e9, "ns"),
            ("t_reset", self.t_reset, self.t_reset_sigma, 1e9, "ns"),
            ("t_rec", self.t_rec, self.t_rec_sigma, 1e9, "ns"),
            ("t_rec (deficit)", self.t_rec_check, self.t_rec_check_sigma, 1e9, "ns"),
        ]
        lines = ["=" * 80, f"CHARACTERIZATION: {self.detector}", "=" * 80]
        for label, value, sigma, scale, unit in rows:
            if value is None:
                lines.append(f"  {label:<18} n/a")
            else:
                lines.append(f"  {label:<18} {value * scale:.6g} +/- {(sigma or 0.0) * scale:.2g} {unit}".rstrip())
        lines.append("=" * 80)
        return "\n".join(lines)

    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.model_dump_json(indent=2))
        return path

    @classmethod
    def load(cls, path: str) -> "CharacterizationReport":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.model_validate(json.load(handle))


class CharfitSettings(BaseModel):
    """Thresholds and histogram settings of a characterization run"""
    tail_start: float = Field(100e-6, gt=0.0,
                              description="Delay where background fits begin and the afterpulse profile ends, s")
    linear_rate_limit: float = Field(5e6, gt=0.0, description="Rate cut of the linear reset-time fit, counts/s")
    n_bootstrap: int = Field(500, ge=2, description="Bootstrap refits per fitted quantity")
    count_rate_order: int = Field(6, ge=3, description="n of the first-and-n histogram used for count rates")
    bin_ticks: int = Field(6, ge=1, description="Bin width of afterpulse and count-rate histograms, ticks")
    recovery_bin_ticks: int = Field(1, ge=1, description="Bin width of the recovery-time histogram, ticks")
    recovery_max_delay: float = Field(1e-6, gt=0.0, description="Range of the recovery-time histogram, s")
    background_fit: Literal["least_squares", "likelihood"] = Field(
        "least_squares", description="Tail fit of the background rate: squared residuals or Poisson likelihood")
    background_bin_ticks: int = Field(60000, ge=1, description="Bin width of the full correlation histogram, ticks")
    background_max_delay: Optional[float] = Field(None, gt=0.0,
                                                  description="Range of the full correlation histogram, s "
                                                              "(None: whole record)")
    ap_max_delay: float = Field(2e-3, gt=0.0, description="Range of the dark first-and-second histogram, s")
    lit_max_delay: Optional[float] = Field(None, gt=0.0,
                                           description="Range of illuminated first-and-n histograms, s")

    class Config:
        json_schema_extra = {
            "example": {
                "tail_start": 1e-4, "linear_rate_limit": 5e6, "n_bootstrap": 500,
                "count_rate_order": 6, "bin_ticks": 6, "recovery_bin_ticks": 1,
                "recovery_max_delay": 1e-6, "background_bin_ticks": 60000, "ap_max_delay": 2e-3
            }
        }

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.ap_max_delay <= self.tail_start:
            raise ValueError(f"ap_max_delay ({self.ap_max_delay:g}) must exceed tail_start ({self.tail_start:g})")
        return self
