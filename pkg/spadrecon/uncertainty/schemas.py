"""
Uncertainty report of a reconstruction
"""

import os
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

SOURCES = ("eta0", "r_b", "ap_total")


class UncertaintyReport(BaseModel):
    """Per-component standard deviations of the reconstructed distribution"""
    sampling_sigma: List[float] = Field(..., description="Sigma per component from count resampling only")
    full_sigma: List[float] = Field(..., description="Sigma per component from parameters and resampling")
    breakdown: Dict[str, List[float]] = Field(default_factory=dict,
                                              description="Sigma per component with one parameter varied (R is zero)")
    g2_sigma: Optional[float] = Field(None, description="Sigma of g2 (full)")
    g2_sigma_sampling: Optional[float] = Field(None, description="Sigma of g2 (sampling only)")
    g2_breakdown: Dict[str, float] = Field(default_factory=dict)
    nbar_fit_sigma: Optional[float] = Field(None, description="Sigma of the fitted Poisson mean (full)")
    nbar_fit_breakdown: Dict[str, float] = Field(default_factory=dict)
    mean_distribution: List[float] = Field(default_factory=list, description="Mean over the full run")
    mc_samples: int = Field(..., ge=2)
    counts_total: float = Field(..., gt=0.0)
    seed: int = Field(0)
    dropped: Dict[str, int] = Field(default_factory=dict, description="Dropped samples per run")

    class Config:
        json_schema_extra = {
            "example": {
                "sampling_sigma": [0.0004, 0.0011], "full_sigma": [0.0009, 0.0025],
                "breakdown": {"eta0": [0.0008, 0.0021], "r_b": [0.0, 0.0], "ap_total": [0.0, 0.0001],
                              "R": [0.0, 0.0]},
                "g2_sigma": 0.003, "nbar_fit_sigma": 0.02, "mc_samples": 1000,
                "counts_total": 30000000, "seed": 0, "dropped": {"full": 0}
            }
        }

    def quadrature_sum(self) -> np.ndarray:
        """Sampling sigma combined with every per-source sigma in quadrature"""
        total = np.square(self.sampling_sigma)
        for values in self.breakdown.values():
            total = total + np.square(values)
        return np.sqrt(total)

    def to_error_bars(self, path: str) -> str:
        """Columns: n, sampling-only sigma, full sigma"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        n = np.arange(len(self.full_sigma))
        np.savetxt(path, np.column_stack([n, self.sampling_sigma, self.full_sigma]),
                   fmt=["%d", "%.9e", "%.9e"], header="n sampling_sigma full_sigma")
        return path

    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.model_dump_json(indent=2))
        return path
