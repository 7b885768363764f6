"""
Loss, background and afterpulse matrices

Every matrix maps column n (photons or clicks before the effect) to row m
(clicks after it) and is column-stochastic.
"""

from typing import Optional

import numpy as np
from scipy.special import comb
from scipy.stats import binom, poisson

from spadrecon.core.profiles import PhotonProfile
from spadrecon.errors import InputError


def build_loss_matrix(eta0: float, n_max: int) -> np.ndarray:
    """Binomial thinning: L[m, n] = C(n, m) eta0^m (1 - eta0)^(n - m)"""
    if not 0.0 <= eta0 <= 1.0:
        raise InputError(f"eta0 must be in [0, 1], got {eta0}")
    m = np.arange(n_max + 1)[:, None]
    n = np.arange(n_max + 1)[None, :]
    return np.where(m <= n, binom.pmf(m, n, eta0), 0.0)


def build_background_matrix(p_b: float, n_max: int) -> np.ndarray:
    """
    Poisson background: B[m, n] = p_b^(m-n) e^(-p_b) / (m-n)! for m >= n

    The last row of each column absorbs the truncated tail so columns sum to 1.
    """
    if p_b < 0:
        raise InputError(f"p_b must be >= 0, got {p_b}")
    m = np.arange(n_max + 1)[:, None]
    n = np.arange(n_max + 1)[None, :]
    matrix = np.where(m >= n, poisson.pmf(m - n, p_b), 0.0)
    matrix[n_max, :] = 1.0 - matrix[:n_max, :].sum(axis=0)
    return matrix


def rebin_profile(ap_profile: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of `factor` bins (trailing partial group kept)"""
    ap_profile = np.asarray(ap_profile, dtype=float)
    if factor == 1:
        return ap_profile
    padded = np.pad(ap_profile, (0, (-ap_profile.size) % factor))
    return padded.reshape(-1, factor).sum(axis=1)


def afterpulse_window_probability(
    profile: PhotonProfile,
    ap_profile: np.ndarray,
    ap_bin_width: Optional[float] = None,
) -> float:
    """
    Probability that a click in the window is followed by an in-window afterpulse

    The afterpulse profile a(tau) is convolved with the normalized photon profile:
    a click in bin i keeps the afterpulses whose delay bin d satisfies i + d < N.

    Args:
        profile: Photon profile gamma over the window
        ap_profile: Afterpulse probability per delay bin
        ap_bin_width: Bin width of ap_profile; must divide the profile bin width

    Returns:
        p_a, clipped to [0, sum of ap_profile]

    Raises:
        InputError: If the bin grids are incompatible
    """
    ap_profile = np.asarray(ap_profile, dtype=float)
    if ap_profile.size == 0:
        return 0.0
    if ap_bin_width is not None:
        ratio = profile.bin_width / ap_bin_width
        factor = int(round(ratio))
        if factor < 1 or abs(ratio - factor) > 1e-6:
            raise InputError(
                f"Afterpulse bins ({ap_bin_width:g} s) must evenly divide photon-profile bins ({profile.bin_width:g} s)"
            )
        ap_profile = rebin_profile(ap_profile, factor)

    ap_total = float(ap_profile.sum())
    n_bins = profile.n_bins
    kept = np.zeros(n_bins + 1)
    kept[1:] = np.cumsum(np.pad(ap_profile, (0, max(0, n_bins - ap_profile.size)))[:n_bins])
    masses = profile.bin_masses()
    p_a = float(np.dot(masses, kept[n_bins - np.arange(n_bins)]))
    return min(max(p_a, 0.0), max(ap_total, 0.0))


def afterpulse_split_count(real_clicks: int, afterpulses: int) -> int:
    """Ways to spread `afterpulses` over `real_clicks` clicks (stars and bars)"""
    if real_clicks == 0:
        return 1 if afterpulses == 0 else 0
    return int(comb(afterpulses + real_clicks - 1, real_clicks - 1, exact=True))


def build_afterpulse_matrix(p_a: float, n_max: int, order: int = 2) -> np.ndarray:
    """
    Afterpulse matrix: A[m+k, m] = C(k+m-1, m-1) (1-p_a)^m p_a^k for k <= order

    Row min(n + order + 1, n_max) of each column takes whatever probability the
    truncation left out.
    """
    if not 0.0 <= p_a < 1.0:
        raise InputError(f"p_a must be in [0, 1), got {p_a}")
    if order < 0:
        raise InputError(f"order must be >= 0, got {order}")
    size = n_max + 1
    matrix = np.zeros((size, size))
    matrix[0, 0] = 1.0
    for m in range(1, size):
        for k in range(0, order + 1):
            if m + k > n_max:
                break
            matrix[m + k, m] = afterpulse_split_count(m, k) * (1.0 - p_a) ** m * p_a ** k
    for n in range(size):
        row = min(n + order + 1, n_max)
        matrix[row, n] = 0.0
        matrix[row, n] = 1.0 - matrix[:, n].sum()
    return matrix
