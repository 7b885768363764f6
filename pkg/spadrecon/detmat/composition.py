"""
Detector matrix D = A R B L
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from spadrecon.core.profiles import PhotonProfile
from spadrecon.core.schemas import DetectorParams
from spadrecon.detmat.factors import (
    afterpulse_window_probability,
    build_afterpulse_matrix,
    build_background_matrix,
    build_loss_matrix,
)
from spadrecon.errors import DimensionMismatchError, InputError
from spadrecon.recovery.matrix import RecoveryMatrix, build_recovery_matrix

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DetectorMatrix:
    """Composite detector matrix with its factors and their parameters"""
    matrix: np.ndarray
    factors: Dict[str, np.ndarray]
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] - 1

    def apply(self, probs: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(probs, dtype=float)


def _check_stochastic(name: str, matrix: np.ndarray, tolerance: float = 1e-6):
    deviation = np.abs(matrix.sum(axis=0) - 1.0).max()
    if deviation > tolerance:
        raise InputError(f"Matrix {name} is not column-stochastic (max column deviation {deviation:.3g})")


def compose(A: np.ndarray, R: np.ndarray, B: np.ndarray, L: np.ndarray,
            parameters: Optional[Dict[str, Any]] = None) -> DetectorMatrix:
    """
    Multiply the four factors in physical order: loss, background, recovery, afterpulsing

    Raises:
        DimensionMismatchError: If the factors are not square matrices of one size
        InputError: If a factor is not column-stochastic
    """
    factors = {"A": np.asarray(A, dtype=float), "R": np.asarray(R, dtype=float),
               "B": np.asarray(B, dtype=float), "L": np.asarray(L, dtype=float)}
    shapes = {name: matrix.shape for name, matrix in factors.items()}
    first = factors["A"].shape
    if len(first) != 2 or first[0] != first[1] or any(shape != first for shape in shapes.values()):
        raise DimensionMismatchError(f"Factors must be square and equal in size, got {shapes}")
    for name, matrix in factors.items():
        _check_stochastic(name, matrix)

    matrix = factors["A"] @ factors["R"] @ factors["B"] @ factors["L"]
    return DetectorMatrix(matrix=matrix, factors=factors, parameters=dict(parameters or {}))


def build_detector_matrix(
    params: DetectorParams,
    profile: PhotonProfile,
    n_max: int,
    order: int,
    ap_order: int = 2,
    recovery: Optional[RecoveryMatrix] = None,
    n_jobs: int = 1,
) -> DetectorMatrix:
    """
    Build all four factors from measured parameters and compose them

    Args:
        params: Detector parameters
        profile: Photon profile over the analysis window
        n_max: Truncation
        order: Recovery order o_R
        ap_order: Afterpulse order o_a
        recovery: Precomputed R to reuse (must match n_max)
        n_jobs: Workers for the recovery matrix

    Returns:
        DetectorMatrix with provenance (eta0, p_b, p_a, orders, window, profile hash)
    """
    window = profile.duration
    if recovery is None:
        recovery = build_recovery_matrix(profile, params.loss_model(), n_max, order, n_jobs=n_jobs)
    elif recovery.n_max != n_max:
        raise DimensionMismatchError(f"Recovery matrix n_max {recovery.n_max} != {n_max}")

    p_b = params.r_b * window
    p_a = afterpulse_window_probability(profile, params.ap_profile_array(), params.ap_bin_width)
    logger.debug(f"[DetMat] eta0={params.eta0:.4f} p_b={p_b:.3g} p_a={p_a:.4g} T={window:.4g}s")

    return compose(
        build_afterpulse_matrix(p_a, n_max, ap_order),
        recovery.matrix,
        build_background_matrix(p_b, n_max),
        build_loss_matrix(params.eta0, n_max),
        parameters={
            "eta0": params.eta0,
            "p_b": p_b,
            "p_a": p_a,
            "order": recovery.order,
            "ap_order": ap_order,
            "window": window,
            "t_dead": params.t_dead,
            "t_rec": params.t_rec,
            "profile_hash": recovery.profile_hash,
        },
    )
