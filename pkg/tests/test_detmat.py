"""
Tests for the loss, background and afterpulse matrices and the composite detector matrix
"""

import itertools

import numpy as np
import pytest

from spadrecon.core import DetectorParams, LossProfileModel, flat_profile, poisson_pmf_vector
from spadrecon.detmat import (
    afterpulse_split_count,
    afterpulse_window_probability,
    build_afterpulse_matrix,
    build_background_matrix,
    build_detector_matrix,
    build_loss_matrix,
    compose,
    rebin_profile,
)
from spadrecon.errors import DimensionMismatchError, InputError
from spadrecon.recovery import build_recovery_matrix

BIN = 1e-9


def _assert_stochastic(matrix, tolerance=1e-12):
    assert np.all(matrix >= -1e-15)
    assert matrix.sum(axis=0) == pytest.approx(np.ones(matrix.shape[1]), abs=tolerance)


def test_loss_matrix():
    matrix = build_loss_matrix(0.6, 8)
    _assert_stochastic(matrix)
    assert matrix[1, 2] == pytest.approx(2 * 0.6 * 0.4)
    assert np.allclose(np.triu(matrix, 1)[0], [0, 0.4, 0.16, 0.064, 0.4 ** 4, 0.4 ** 5, 0.4 ** 6, 0.4 ** 7, 0.4 ** 8])
    assert np.allclose(build_loss_matrix(1.0, 4), np.eye(5))
    with pytest.raises(InputError):
        build_loss_matrix(1.2, 4)


def test_loss_matrix_thins_poisson():
    thinned = build_loss_matrix(0.5, 40) @ poisson_pmf_vector(4.0, 40).probs
    assert thinned == pytest.approx(poisson_pmf_vector(2.0, 40).probs, abs=1e-9)


def test_background_matrix():
    matrix = build_background_matrix(0.1, 6)
    _assert_stochastic(matrix)
    assert matrix[0, 0] == pytest.approx(np.exp(-0.1))
    assert matrix[3, 2] == pytest.approx(0.1 * np.exp(-0.1))
    assert np.allclose(np.triu(matrix, 1), 0.0)
    assert np.allclose(build_background_matrix(0.0, 4), np.eye(5))


def _split_patterns(clicks, afterpulses):
    """Afterpulses left by each click, listed one pattern at a time"""
    return [pattern for pattern in itertools.product(range(afterpulses + 1), repeat=clicks)
            if sum(pattern) == afterpulses]


def _pattern_probability(pattern, p_a):
    # each click ends its afterpulse chain once with 1 - p_a
    return float(np.prod([p_a ** j * (1 - p_a) for j in pattern]))


def test_afterpulse_split_count():
    assert afterpulse_split_count(0, 0) == 1
    assert afterpulse_split_count(0, 2) == 0
    assert afterpulse_split_count(1, 3) == 1
    assert afterpulse_split_count(3, 2) == 6
    for clicks in range(7):
        for afterpulses in range(7):
            assert afterpulse_split_count(clicks, afterpulses) == len(_split_patterns(clicks, afterpulses))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_afterpulse_matrix_matches_enumerated_patterns(order):
    p_a, n_max = 0.07, 6
    matrix = build_afterpulse_matrix(p_a, n_max, order=order)
    _assert_stochastic(matrix)
    assert matrix[:, 0].tolist() == [1.0] + [0.0] * n_max
    for n in range(1, n_max + 1):
        remainder_row = min(n + order + 1, n_max)
        expected = np.zeros(n_max + 1)
        for m in range(n, remainder_row):
            if m - n <= order:
                expected[m] = sum(_pattern_probability(p, p_a) for p in _split_patterns(n, m - n))
        expected[remainder_row] = 1.0 - expected.sum()
        assert matrix[:, n] == pytest.approx(expected, abs=1e-14)
    if order == 3:
        assert matrix[5, 2] == pytest.approx(4 * (1 - p_a) ** 2 * p_a ** 3)


def test_afterpulse_matrix():
    p_a = 0.05
    matrix = build_afterpulse_matrix(p_a, 8, order=2)
    _assert_stochastic(matrix)
    assert matrix[0, 0] == 1.0
    assert matrix[2, 2] == pytest.approx((1 - p_a) ** 2)
    assert matrix[3, 2] == pytest.approx(2 * (1 - p_a) ** 2 * p_a)
    assert matrix[4, 2] == pytest.approx(3 * (1 - p_a) ** 2 * p_a ** 2)
    # remainder of the truncated expansion sits one row past the order
    assert matrix[5, 2] == pytest.approx(1 - (1 - p_a) ** 2 * (1 + 2 * p_a + 3 * p_a ** 2))
    assert np.allclose(build_afterpulse_matrix(0.0, 5), np.eye(6))
    with pytest.raises(InputError):
        build_afterpulse_matrix(1.0, 5)


def test_rebin_profile():
    assert rebin_profile(np.arange(7.0), 3).tolist() == [3.0, 12.0, 6.0]
    assert rebin_profile([1.0, 2.0], 1).tolist() == [1.0, 2.0]


def test_afterpulse_window_probability():
    profile = flat_profile(10 * BIN, BIN)
    ap_profile = np.zeros(20)
    ap_profile[2] = 0.01
    # clicks in the first 8 bins keep an afterpulse 2 bins later
    assert afterpulse_window_probability(profile, ap_profile, BIN) == pytest.approx(0.008)

    fine = np.zeros(40)
    fine[4] = 0.01
    assert afterpulse_window_probability(profile, fine, BIN / 2) == pytest.approx(0.008)

    assert afterpulse_window_probability(profile, np.array([])) == 0.0
    with pytest.raises(InputError):
        afterpulse_window_probability(profile, fine, 0.3 * BIN)


def test_compose_checks_factors():
    eye = np.eye(4)
    detector = compose(eye, eye, eye, build_loss_matrix(0.5, 3))
    assert np.allclose(detector.matrix, build_loss_matrix(0.5, 3))
    assert set(detector.factors) == {"A", "R", "B", "L"}

    with pytest.raises(DimensionMismatchError):
        compose(np.eye(3), eye, eye, eye)
    bad = eye.copy()
    bad[0, 0] = 0.5
    with pytest.raises(InputError):
        compose(eye, bad, eye, eye)


def test_build_detector_matrix():
    params = DetectorParams.from_table("SPAD1", bin_width=BIN)
    profile = flat_profile(300 * BIN, BIN)
    detector = build_detector_matrix(params, profile, n_max=6, order=2)

    _assert_stochastic(detector.matrix, tolerance=1e-6)
    assert detector.n_max == 6
    assert detector.parameters["p_b"] == pytest.approx(params.r_b * 300 * BIN)
    assert 0.0 < detector.parameters["p_a"] < params.ap_total
    assert detector.parameters["order"] == 2
    product = detector.factors["A"] @ detector.factors["R"] @ detector.factors["B"] @ detector.factors["L"]
    assert np.allclose(detector.matrix, product)
    assert np.allclose(detector.apply(np.eye(7)[:, 3]), detector.matrix[:, 3])


def test_build_detector_matrix_reuses_recovery():
    params = DetectorParams(eta0=0.7, t_dead=5 * BIN, t_reset=3 * BIN, t_rec=8 * BIN)
    profile = flat_profile(60 * BIN, BIN)
    recovery = build_recovery_matrix(profile, LossProfileModel(5 * BIN, 8 * BIN), n_max=4, order=1)
    detector = build_detector_matrix(params, profile, n_max=4, order=1, recovery=recovery)
    assert np.allclose(detector.factors["R"], recovery.matrix)
    with pytest.raises(DimensionMismatchError):
        build_detector_matrix(params, profile, n_max=5, order=1, recovery=recovery)
