"""
EME solver configuration, reconstruction results and calibration inputs
"""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from spadrecon.core.distributions import NumberDistribution


class EmeConfig(BaseModel):
    """Settings of the expectation-maximization-entropy solver"""
    alpha: float = Field(1e-3, ge=0.0, description="Entropy regularization strength")
    epsilon: float = Field(1e-12, gt=0.0, description="Stop when the Euclidean step norm drops below this")
    max_iter: int = Field(1_000_000, ge=1, description="Iteration cap")
    raise_on_failure: bool = Field(False, description="Raise instead of flagging non-convergence or singular rows")

    class Config:
        json_schema_extra = {
            "example": {"alpha": 0.001, "epsilon": 1e-12, "max_iter": 1000000, "raise_on_failure": False}
        }


class ReconstructionResult(BaseModel):
    """Reconstructed photon-number distribution and its metrics"""
    distribution: List[float] = Field(..., description="Reconstructed P_n for n = 0..n_max")
    iterations: int = Field(..., ge=0, description="EME iterations performed")
    converged: bool = Field(..., description="Whether the step norm fell below epsilon")
    g2_recon: Optional[float] = Field(None, description="Pulse-averaged g2 of the reconstruction (None if mean is 0)")
    fitted_nbar: float = Field(..., description="Mean of the best-fit Poissonian")
    tvd_to_fit: float = Field(..., ge=0.0, le=1.0, description="Total variation distance to the fitted Poissonian")
    nbar_exp: Optional[float] = Field(None, description="Independently calibrated mean photon number")
    delta_nbar: Optional[float] = Field(None, description="(nbar_exp - nbar_fit) / nbar_exp")
    singular_rows: List[int] = Field(default_factory=list, description="Click numbers skipped for a zero prediction")
    log_likelihood: float = Field(..., description="Sum_m C_m ln (D P)_m at the final iterate")
    alpha: float = Field(..., description="Entropy strength used")

    class Config:
        json_schema_extra = {
            "example": {
                "distribution": [0.0067, 0.0337, 0.0842, 0.1404, 0.1755, 0.1755],
                "iterations": 8412,
                "converged": True,
                "g2_recon": 0.998,
                "fitted_nbar": 4.97,
                "tvd_to_fit": 0.0042,
                "nbar_exp": 5.01,
                "delta_nbar": 0.008,
                "singular_rows": [],
                "log_likelihood": -2.21,
                "alpha": 0.001
            }
        }

    def as_distribution(self) -> NumberDistribution:
        return NumberDistribution(self.distribution)


class CalibrationInputs(BaseModel):
    """Power-meter calibration of the expected mean photon number

    f_s converts cw power to energy per pulse, so it carries the window
    duration: shape ratio (pulsed/cw clicks) times T, in seconds.
    """
    V_meas: float = Field(..., gt=0.0, description="Mean trap-detector voltage in V")
    V_meas_sigma: float = Field(0.0, ge=0.0)
    T_ND: float = Field(0.001412, gt=0.0, description="ND filter transmittance")
    T_ND_sigma: float = Field(0.000001, ge=0.0)
    f_s: float = Field(..., gt=0.0, description="Shape factor times window duration in s")
    f_s_sigma: float = Field(0.0, ge=0.0)
    eta_trap: float = Field(..., gt=0.0, description="Trap detector efficiency")
    eta_trap_sigma: float = Field(0.0, ge=0.0)
    R_resp: float = Field(0.6293, gt=0.0, description="Trap responsivity in A/W")
    G: float = Field(1e8, gt=0.0, description="Transimpedance gain in V/A")
    wavelength: float = Field(780e-9, gt=0.0, description="Wavelength in m")

    class Config:
        json_schema_extra = {
            "example": {
                "V_meas": 0.15, "V_meas_sigma": 1e-5,
                "T_ND": 0.001412, "T_ND_sigma": 1e-6,
                "f_s": 3.0e-6, "f_s_sigma": 3.0e-9,
                "eta_trap": 0.995, "eta_trap_sigma": 0.001,
                "R_resp": 0.6293, "G": 1e8, "wavelength": 7.8e-7
            }
        }

    @field_validator("V_meas", "T_ND", "f_s", "eta_trap", "R_resp", "G", "wavelength")
    @classmethod
    def _finite(cls, value: float) -> float:
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("Calibration inputs must be finite")
        return value
