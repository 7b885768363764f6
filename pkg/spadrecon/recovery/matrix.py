"""
Recovery-effects matrix R: click number given photon number
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from spadrecon.core.profiles import LossProfileModel, PhotonProfile
from spadrecon.errors import InputError
from spadrecon.recovery.events import click_count, enumerate_events
from spadrecon.recovery.integrals import EventIntegrator
from spadrecon.utils.run_tracker import track_stage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecoveryMatrix:
    """R with the settings that produced it"""
    matrix: np.ndarray
    order: int
    profile_hash: str
    loss: LossProfileModel
    window: float
    raw_column_sums: np.ndarray

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] - 1


def _build_column(integrator: EventIntegrator, n_photons: int, order: int, size: int) -> np.ndarray:
    column = np.zeros(size)
    for event in enumerate_events(n_photons, order):
        column[click_count(event)] += integrator.probability(event)
    return column


def build_recovery_matrix(
    profile: PhotonProfile,
    loss: LossProfileModel,
    n_max: int,
    order: int,
    window: Optional[float] = None,
    n_jobs: int = 1,
) -> RecoveryMatrix:
    """
    Assemble R from all events with at most `order` photons in recovery periods

    Args:
        profile: Photon profile gamma over the window
        loss: Loss profile D
        n_max: Truncation of photon and click number
        order: Recovery order o_R
        window: Window duration T; must match the profile when given
        n_jobs: joblib workers for column construction (each keeps its own cache)

    Returns:
        RecoveryMatrix whose columns sum to 1; for columns with n - order > 1 the
        uncalculated probability is put in row n - order - 1

    Raises:
        InputError: On negative order/n_max or a window inconsistent with the profile
        NumericalUnderflowError: If the profile is identically zero
    """
    if order < 0 or n_max < 0:
        raise InputError(f"order and n_max must be >= 0, got order={order}, n_max={n_max}")
    if window is not None and abs(window - profile.duration) > 0.5 * profile.bin_width:
        raise InputError(f"Window {window:g} s does not match the profile duration {profile.duration:g} s")

    started = time.perf_counter()
    size = n_max + 1
    matrix = np.zeros((size, size))
    matrix[0, 0] = 1.0

    photon_numbers = list(range(1, size))
    if n_jobs == 1:
        integrator = EventIntegrator(profile, loss)
        columns = [_build_column(integrator, n, order, size) for n in photon_numbers]
    else:
        columns = Parallel(n_jobs=n_jobs)(
            delayed(_build_column)(EventIntegrator(profile, loss), n, order, size) for n in photon_numbers
        )
    for n, column in zip(photon_numbers, columns):
        matrix[:, n] = column

    raw_sums = matrix.sum(axis=0)
    for n in range(size):
        if n - order > 1:
            row = n - order - 1
            matrix[row, n] = max(0.0, 1.0 - (raw_sums[n] - matrix[row, n]))
        elif abs(raw_sums[n] - 1.0) > 1e-6:
            logger.warning(f"[Recovery] Column {n} sums to {raw_sums[n]:.9f} without truncation")

    elapsed = time.perf_counter() - started
    track_stage("recovery", f"R n_max={n_max} o_R={order}", elapsed)
    logger.info(f"[Recovery] Built {size}x{size} matrix with o_R={order} in {elapsed:.2f}s")
    return RecoveryMatrix(
        matrix=matrix,
        order=order,
        profile_hash=profile.content_hash(),
        loss=loss,
        window=profile.duration,
        raw_column_sums=raw_sums,
    )
