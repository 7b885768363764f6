"""
Reconstruction metrics: total variation distance, Poisson fit, g2, expected mean photon number
"""

from typing import Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK
from scipy.optimize import minimize

from spadrecon.core.distributions import NumberDistribution, poisson_pmf_vector
from spadrecon.errors import DimensionMismatchError, InputError, ZeroMeanError
from spadrecon.eme.schemas import CalibrationInputs

LOG_FLOOR = 1e-300


def total_variation_distance(p1: NumberDistribution, p2: NumberDistribution) -> float:
    """Half the L1 distance between two distributions of equal length"""
    if len(p1) != len(p2):
        raise DimensionMismatchError(f"Distributions differ in length: {len(p1)} vs {len(p2)}")
    return float(min(1.0, 0.5 * np.abs(p1.probs - p2.probs).sum()))


def fit_poissonian(dist: NumberDistribution, method: str = "least_squares") -> Tuple[float, float]:
    """
    Fit a Poissonian to a distribution

    Args:
        dist: Normalized distribution
        method: "least_squares" (sum of squared component differences) or
            "likelihood" (maximize sum_n p_n ln q_n)

    Returns:
        (nbar_fit, tvd) with tvd the distance to the fitted Poissonian

    Raises:
        InputError: On an unknown method
    """
    n_max = dist.n_max
    target = dist.probs

    if method == "least_squares":
        def objective(x):
            return float(np.sum((target - poisson_pmf_vector(max(x[0], 0.0), n_max).probs) ** 2))
    elif method == "likelihood":
        def objective(x):
            model = poisson_pmf_vector(max(x[0], 0.0), n_max).probs
            return float(-np.dot(target, np.log(np.maximum(model, LOG_FLOOR))))
    else:
        raise InputError(f"Unknown Poisson fit method '{method}'")

    start = dist.mean()
    result = minimize(objective, x0=[start], method="Nelder-Mead", bounds=[(0.0, float(max(n_max, 1)))],
                      options={"xatol": 1e-10, "fatol": 1e-20, "maxiter": 2000})
    nbar_fit = float(max(result.x[0], 0.0))
    tvd = total_variation_distance(dist, poisson_pmf_vector(nbar_fit, n_max))
    return nbar_fit, tvd


def g2_reconstructed(dist: NumberDistribution) -> float:
    """Pulse-averaged g2 = <n(n-1)> / <n>^2"""
    mean = dist.mean()
    if mean <= 0:
        raise ZeroMeanError("g2 is undefined for a distribution with zero mean")
    return dist.factorial_moment(2) / mean ** 2


def expected_nbar(cal: CalibrationInputs) -> Tuple[float, float]:
    """
    Mean photon number per pulse from the power calibration

    Returns:
        (nbar_exp, sigma) with the relative uncertainties of V_meas, T_ND,
        eta_trap and f_s added in quadrature
    """
    power = cal.V_meas * cal.T_ND / (cal.eta_trap * cal.R_resp * cal.G)
    photon_energy = PLANCK * SPEED_OF_LIGHT / cal.wavelength
    nbar = power * cal.f_s / photon_energy
    relative = np.sqrt(
        (cal.V_meas_sigma / cal.V_meas) ** 2
        + (cal.T_ND_sigma / cal.T_ND) ** 2
        + (cal.eta_trap_sigma / cal.eta_trap) ** 2
        + (cal.f_s_sigma / cal.f_s) ** 2
    )
    return float(nbar), float(nbar * relative)


def delta_nbar(nbar_exp: float, nbar_fit: float) -> float:
    """Relative calibration difference (nbar_exp - nbar_fit) / nbar_exp"""
    if nbar_exp <= 0:
        raise InputError(f"nbar_exp must be > 0, got {nbar_exp}")
    return (nbar_exp - nbar_fit) / nbar_exp
