"""
Tests for the characterization and reconstruction pipelines
"""

import numpy as np
import pytest

from spadrecon.core import (
    CycleWindow,
    DEFAULT_BIN_WIDTH,
    DetectorParams,
    PhotonProfile,
    default_n_max,
    flat_profile,
    normalize,
    poisson_pmf_vector,
)
from spadrecon.detmat import build_detector_matrix
from spadrecon.eme import EmeConfig
from spadrecon.errors import InputError, SpadReconError
from spadrecon.sim import PoissonSource, SimConfig, simulate
from spadrecon.tags import TimeTagStream
from spadrecon.workflows import (
    CharacterizationWorkflow,
    characterize_detector,
    estimate_n_max,
    reconstruct_distribution,
    reconstruct_stream,
    select_recovery_order,
)

BW = DEFAULT_BIN_WIDTH
SOLVER = EmeConfig(epsilon=1e-9, max_iter=200_000)


def _detector(**extra):
    return DetectorParams(eta0=0.6, t_dead=14 * BW, t_reset=9 * BW, t_rec=23 * BW, **extra)


def _exact_clicks(params, profile, n_max, nbar=1.5, order=3):
    detector = build_detector_matrix(params, profile, n_max, order)
    return normalize(detector.apply(poisson_pmf_vector(nbar, n_max).probs))


def test_estimate_n_max_from_click_mean():
    clicks = normalize([0.4, 0.6])
    assert estimate_n_max(clicks, 0.6) == default_n_max(1.0)
    with pytest.raises(InputError):
        estimate_n_max(clicks, 0.0)


def test_reconstruct_distribution_recovers_exact_clicks():
    params = _detector()
    profile = flat_profile(120 * BW, BW)
    clicks = _exact_clicks(params, profile, n_max=8)
    result, detector = reconstruct_distribution(clicks, params, profile, order=3,
                                                cfg=EmeConfig(alpha=0.0, epsilon=1e-10, max_iter=200_000))
    assert detector.matrix.shape == (9, 9)
    assert result.fitted_nbar == pytest.approx(1.5, abs=0.05)


def test_select_recovery_order_doubles_until_settled():
    params = _detector()
    profile = flat_profile(60 * BW, BW)
    clicks = _exact_clicks(params, profile, n_max=5)
    order, result, detector, scan = select_recovery_order(clicks, params, profile, cfg=SOLVER)

    assert 1 in scan
    assert set(scan) <= {1, 2, 4, 5}
    assert order in scan
    assert order <= 5
    assert detector.matrix.shape == (6, 6)
    assert len(result.distribution) == 6

    with pytest.raises(InputError):
        select_recovery_order(clicks, params, profile, max_order=0)


def test_reconstruct_stream_from_simulation():
    profile = PhotonProfile(bin_width=BW, values=np.concatenate([np.ones(304), np.zeros(23)]))
    cfg = SimConfig(detector=_detector(r_b=2e4), profile=profile, source=PoissonSource(2.0),
                    cycles=20_000, seed=11, partition_cycles=5000)
    stream = simulate(cfg)
    window = CycleWindow(t_start=0.0, t_end=profile.duration, bin_width=BW)

    outcome = reconstruct_stream(stream, cfg.detector, window, n_max=8, order=3, cfg=SOLVER)
    assert outcome.n_cycles == 20_000
    assert outcome.order == 3
    assert outcome.order_scan is None
    assert outcome.clicks.n_max == 8
    assert outcome.profile.n_bins == window.n_bins
    assert outcome.result.fitted_nbar == pytest.approx(2.0, abs=0.2)


def test_characterization_requires_dark_record():
    with pytest.raises(InputError):
        characterize_detector(None)


def test_failed_step_is_recorded_and_labelled():
    # two close clicks: nothing reaches the background tail
    dark = TimeTagStream(cycles=(np.array([10, 20]),), cycle_length=10_000_000, continuous=True)
    workflow = CharacterizationWorkflow(seed=1)
    with pytest.raises(SpadReconError, match=r"^Background rate \[dark\]"):
        workflow.run(("dark", dark))
    assert len(workflow.steps) == 1
    assert workflow.steps[0]["success"] is False
    assert workflow.steps[0]["name"] == "Background rate [dark]"
