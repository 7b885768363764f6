"""
Reconstruction workflow: time tags in, photon-number distribution out
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

from spadrecon.core.distributions import NumberDistribution, default_n_max
from spadrecon.core.profiles import PhotonProfile
from spadrecon.core.schemas import CycleWindow, DetectorParams
from spadrecon.detmat.composition import DetectorMatrix, build_detector_matrix
from spadrecon.eme.reconstruction import eme_reconstruct
from spadrecon.eme.schemas import EmeConfig, ReconstructionResult
from spadrecon.errors import InputError
from spadrecon.recovery.matrix import RecoveryMatrix, build_recovery_matrix
from spadrecon.tags.extraction import click_number_distribution, estimate_photon_profile
from spadrecon.tags.stream import TimeTagStream

logger = logging.getLogger(__name__)

# Doubling stops once the distance to the fitted Poissonian moves less than this
ORDER_TOLERANCE = 1e-3


@dataclass(frozen=True)
class ReconstructionOutcome:
    """Everything a reconstruction produced, for writing result files"""
    result: ReconstructionResult
    detector: DetectorMatrix
    clicks: NumberDistribution
    profile: PhotonProfile
    n_cycles: int
    order: int
    order_scan: Optional[Dict[int, float]] = None


def estimate_n_max(clicks: NumberDistribution, eta0: float) -> int:
    """Default truncation at the mean photon number implied by the click mean"""
    if eta0 <= 0:
        raise InputError("eta0 must be > 0 to estimate n_max")
    return default_n_max(clicks.mean() / eta0)


def reconstruct_distribution(
    clicks: NumberDistribution,
    params: DetectorParams,
    profile: PhotonProfile,
    order: int,
    ap_order: int = 2,
    cfg: Optional[EmeConfig] = None,
    nbar_exp: Optional[float] = None,
    recovery: Optional[RecoveryMatrix] = None,
    n_jobs: int = 1,
):
    """Build D for the given click distribution size and run EME"""
    detector = build_detector_matrix(params, profile, clicks.n_max, order, ap_order=ap_order,
                                     recovery=recovery, n_jobs=n_jobs)
    result = eme_reconstruct(clicks, detector.matrix, cfg, nbar_exp=nbar_exp)
    return result, detector


def select_recovery_order(
    clicks: NumberDistribution,
    params: DetectorParams,
    profile: PhotonProfile,
    ap_order: int = 2,
    cfg: Optional[EmeConfig] = None,
    nbar_exp: Optional[float] = None,
    max_order: Optional[int] = None,
    tolerance: float = ORDER_TOLERANCE,
    n_jobs: int = 1,
):
    """
    Smallest recovery order whose doubling moves the reconstruction's distance
    to its fitted Poissonian by less than `tolerance`

    Orders tried: 1, 2, 4, ... up to max_order (default n_max), which is used
    when no pair settles.

    Returns:
        (order, result, detector, scan) where scan maps each tried order to
        its distance
    """
    max_order = clicks.n_max if max_order is None else max_order
    if max_order < 1:
        raise InputError(f"max_order must be >= 1, got {max_order}")

    scan: Dict[int, float] = {}
    order = 1
    previous = reconstruct_distribution(clicks, params, profile, order, ap_order, cfg, nbar_exp, n_jobs=n_jobs)
    scan[order] = previous[0].tvd_to_fit
    while order < max_order:
        doubled = min(2 * order, max_order)
        current = reconstruct_distribution(clicks, params, profile, doubled, ap_order, cfg, nbar_exp,
                                           n_jobs=n_jobs)
        scan[doubled] = current[0].tvd_to_fit
        change = abs(current[0].tvd_to_fit - previous[0].tvd_to_fit)
        logger.debug(f"[Recovery] o_R {order} -> {doubled}: distance change {change:.3g}")
        if change < tolerance:
            break
        order, previous = doubled, current
    logger.info(f"[Recovery] Selected o_R = {order} (tried {sorted(scan)})")
    result, detector = previous
    return order, result, detector, scan


def reconstruct_stream(
    stream: TimeTagStream,
    params: DetectorParams,
    window: CycleWindow,
    n_max: Optional[int] = None,
    order: Optional[int] = None,
    ap_order: int = 2,
    cfg: Optional[EmeConfig] = None,
    nbar_exp: Optional[float] = None,
    n_jobs: int = 1,
) -> ReconstructionOutcome:
    """
    Reconstruct the photon-number distribution behind a pulsed time-tag stream

    The photon profile comes from single-click cycles of the same stream,
    the click distribution from every cycle.

    Args:
        stream: Pulsed time tags
        params: Detector parameters
        window: Analysis window
        n_max: Truncation (default from the click mean and eta0)
        order: Recovery order (default: select_recovery_order)
        ap_order: Afterpulse order
        cfg: EME settings
        nbar_exp: Calibrated mean photon number for delta_nbar
        n_jobs: Workers for the recovery matrix
    """
    profile = estimate_photon_profile(stream, window)
    if n_max is None:
        n_max = estimate_n_max(click_number_distribution(stream, window), params.eta0)
    clicks = click_number_distribution(stream, window, n_max)
    logger.info(f"[Recovery] {stream.n_cycles} cycles, mean clicks {clicks.mean():.4g}, n_max {n_max}")

    scan = None
    if order is None:
        order, result, detector, scan = select_recovery_order(clicks, params, profile, ap_order, cfg, nbar_exp,
                                                              n_jobs=n_jobs)
    else:
        recovery = build_recovery_matrix(profile, params.loss_model(), n_max, order, n_jobs=n_jobs)
        result, detector = reconstruct_distribution(clicks, params, profile, order, ap_order, cfg, nbar_exp,
                                                    recovery=recovery, n_jobs=n_jobs)
    return ReconstructionOutcome(result=result, detector=detector, clicks=clicks, profile=profile,
                                 n_cycles=stream.n_cycles, order=order, order_scan=scan)
