"""
Tests for EME reconstruction and its metrics
"""

import numpy as np
import pytest

from spadrecon.core import DetectorParams, flat_profile, normalize, poisson_pmf_vector
from spadrecon.detmat import build_detector_matrix, build_loss_matrix
from spadrecon.eme import (
    CalibrationInputs,
    EmeConfig,
    delta_nbar,
    eme_reconstruct,
    expected_nbar,
    fit_poissonian,
    g2_reconstructed,
    iterate_eme,
    log_likelihood,
    total_variation_distance,
)
from spadrecon.errors import DimensionMismatchError, InputError, NotConvergedError, ZeroMeanError

BIN = 1e-9


def test_identity_matrix_returns_clicks():
    clicks = normalize([0.1, 0.4, 0.3, 0.2])
    result = eme_reconstruct(clicks, np.eye(4), EmeConfig(alpha=0.0))
    assert result.converged
    assert result.distribution == pytest.approx(clicks.to_list(), abs=1e-12)
    assert result.singular_rows == []


def test_likelihood_never_decreases_without_entropy():
    clicks = normalize([0.2, 0.35, 0.3, 0.1, 0.05, 0.0, 0.0])
    matrix = build_loss_matrix(0.6, 6)
    previous = -np.inf
    for step in iterate_eme(clicks, matrix, alpha=0.0):
        current = log_likelihood(clicks, matrix, step.probs)
        assert current >= previous - 1e-12
        previous = current
        if step.iteration == 200:
            break


def test_round_trip_through_detector_matrix():
    params = DetectorParams(eta0=0.6, t_dead=14 * BIN, t_reset=9 * BIN, t_rec=23 * BIN)
    profile = flat_profile(300 * BIN, BIN)
    detector = build_detector_matrix(params, profile, n_max=14, order=3)
    truth = poisson_pmf_vector(3.0, 14)
    clicks = normalize(detector.apply(truth.probs))

    result = eme_reconstruct(clicks, detector, EmeConfig(alpha=0.0, epsilon=1e-10, max_iter=200_000),
                             nbar_exp=3.0)
    assert total_variation_distance(result.as_distribution(), truth) < 3e-2
    assert result.fitted_nbar == pytest.approx(3.0, abs=0.06)
    assert abs(result.delta_nbar) < 0.02
    assert result.g2_recon == pytest.approx(1.0, abs=0.05)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        eme_reconstruct(normalize([0.5, 0.5]), np.eye(3))


def test_not_converged_flag_and_raise():
    clicks = normalize([0.2, 0.5, 0.3])
    matrix = build_loss_matrix(0.5, 2)
    result = eme_reconstruct(clicks, matrix, EmeConfig(max_iter=3))
    assert not result.converged
    assert result.iterations == 3
    with pytest.raises(NotConvergedError):
        eme_reconstruct(clicks, matrix, EmeConfig(max_iter=3, raise_on_failure=True))


def test_singular_rows_are_reported():
    # a matrix that can never produce one click
    matrix = np.eye(3)
    matrix[1, 1] = 0.0
    matrix[2, 1] = 1.0
    clicks = normalize([0.5, 0.25, 0.25])
    result = eme_reconstruct(clicks, matrix, EmeConfig(max_iter=50))
    assert result.singular_rows == [1]


def test_fit_poissonian_recovers_mean():
    for method in ("least_squares", "likelihood"):
        nbar, tvd = fit_poissonian(poisson_pmf_vector(4.2, 30), method=method)
        assert nbar == pytest.approx(4.2, abs=1e-4)
        assert tvd < 1e-5
    with pytest.raises(InputError):
        fit_poissonian(poisson_pmf_vector(1.0, 5), method="chi2")


def test_g2():
    assert g2_reconstructed(poisson_pmf_vector(2.0, 40)) == pytest.approx(1.0, abs=1e-9)
    # single photon state
    assert g2_reconstructed(normalize([0, 1, 0])) == 0.0
    with pytest.raises(ZeroMeanError):
        g2_reconstructed(normalize([1, 0, 0]))


def test_expected_nbar_from_calibration():
    cal = CalibrationInputs(V_meas=0.15, V_meas_sigma=1.5e-4, f_s=3e-6, eta_trap=0.995)
    nbar, sigma = expected_nbar(cal)
    power = 0.15 * 0.001412 / (0.995 * 0.6293 * 1e8)
    photon_energy = 6.62607015e-34 * 299792458.0 / 780e-9
    assert nbar == pytest.approx(power * 3e-6 / photon_energy, rel=1e-9)
    # V_meas and T_ND relative errors dominate
    assert sigma / nbar == pytest.approx(np.hypot(1e-3, 1e-6 / 0.001412), rel=1e-6)


def test_delta_nbar():
    assert delta_nbar(5.0, 4.9) == pytest.approx(0.02)
    with pytest.raises(InputError):
        delta_nbar(0.0, 1.0)
