"""
Tests for the characterization fits: count rate, background, afterpulsing, DEP and shape factor
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from spadrecon.charfit import (
    AfterpulseProfile,
    CharacterizationReport,
    CharfitSettings,
    DepMeasurement,
    bootstrap,
    dead_time_consistency,
    dep_model,
    extract_afterpulse_profile,
    first_and_n_density,
    fit_background_rate,
    fit_count_rate,
    fit_reset_time,
    loss_point,
    measure_dep_fraction,
    recovery_time_from_histogram,
    shape_factor,
)
from spadrecon.core import CycleWindow, DEFAULT_BIN_WIDTH, DetectorParams, flat_profile
from spadrecon.errors import InputError, InsufficientDataError, ZeroDenominatorError
from spadrecon.sim import PoissonSource, SimConfig, simulate_cw
from spadrecon.tags import DelayHistogram, HistogramKind, TimeTagStream
from spadrecon.tags import first_and_n_histogram, full_correlation_histogram

NS = 1e-9


def _cw_config(detector, seed=11):
    return SimConfig(detector=detector, profile=flat_profile(100 * NS, DEFAULT_BIN_WIDTH),
                     source=PoissonSource(1.0), cycles=1, seed=seed)


def _binary_detector(r_b=0.0):
    t_rec = 23 * DEFAULT_BIN_WIDTH
    return DetectorParams(eta0=1.0, r_b=r_b, t_dead=t_rec, t_reset=0.0, t_rec=t_rec)


def _histogram(counts, n_source_clicks, n=2, tick=NS):
    return DelayHistogram(kind=HistogramKind.FIRST_AND_N, bin_width=1, counts=np.asarray(counts),
                          n_source_clicks=n_source_clicks, collection_time=1.0, tick_duration=tick, n=n)


def test_first_and_n_density_normalized():
    t = np.linspace(0, 40e-6, 400_001)
    for n in (2, 3, 5):
        density = first_and_n_density(t, 1e6, 0.0, 20 * NS, n)
        assert trapezoid(density, t) == pytest.approx(1.0, abs=1e-3)
        assert np.all(density[t <= (n - 1) * 20 * NS] == 0.0)


def test_count_rate_from_simulated_cw():
    detector = _binary_detector()
    stream = simulate_cw(_cw_config(detector), rate=2e6, duration=0.05)
    hist = first_and_n_histogram(stream, 4, bin_width=6, max_delay=int(30e-6 / detector.tick_duration))
    fit = fit_count_rate(hist, tau_r=detector.t_rec, fit_start=4 * detector.t_rec, n_bootstrap=20, seed=1)
    assert fit.n == 4
    assert fit.rate == pytest.approx(2e6, rel=0.03)
    assert fit.rate_sigma > 0
    assert abs(fit.p_a_fit) < 0.05


def test_count_rate_rejects_wrong_histogram():
    stream = TimeTagStream(cycles=(np.array([0, 10, 25]),), cycle_length=100)
    with pytest.raises(InputError):
        fit_count_rate(full_correlation_histogram(stream, bin_width=1), n_bootstrap=0)
    empty = first_and_n_histogram(TimeTagStream(cycles=((),), cycle_length=100), 2, bin_width=1)
    with pytest.raises(InsufficientDataError):
        fit_count_rate(empty, n_bootstrap=0)


def test_background_rate_from_dark_record():
    detector = _binary_detector(r_b=1e4)
    stream = simulate_cw(_cw_config(detector, seed=5), rate=0.0, duration=0.5)
    hist = full_correlation_histogram(stream, bin_width=60000)
    fit = fit_background_rate(hist, n_bootstrap=20, seed=2)
    assert fit.r_b == pytest.approx(1e4, rel=0.07)
    assert fit.collection_time == pytest.approx(0.5, rel=1e-6)
    assert fit.sigma > 0


def test_background_line_fit_matches_likelihood_fit():
    detector = _binary_detector(r_b=1e4)
    stream = simulate_cw(_cw_config(detector, seed=8), rate=0.0, duration=0.5)
    hist = full_correlation_histogram(stream, bin_width=60000)
    line = fit_background_rate(hist, n_bootstrap=10, seed=3)
    likelihood = fit_background_rate(hist, n_bootstrap=10, seed=3, method="likelihood")
    assert line.r_b == pytest.approx(1e4, rel=0.07)
    assert likelihood.r_b == pytest.approx(1e4, rel=0.07)
    assert line.r_b == pytest.approx(likelihood.r_b, rel=0.05)
    assert line.sigma > 0 and likelihood.sigma > 0
    with pytest.raises(InputError):
        fit_background_rate(hist, n_bootstrap=0, method="chi_square")


def test_background_needs_tail_counts():
    stream = TimeTagStream(cycles=(np.array([0, 10]),), cycle_length=1000)
    with pytest.raises(InsufficientDataError):
        fit_background_rate(full_correlation_histogram(stream, bin_width=10), n_bootstrap=0)


def test_afterpulse_profile_extraction():
    counts = np.full(300, 100)
    counts[:20] = 0
    counts[30:40] += 50
    hist = _histogram(counts, n_source_clicks=1000)

    t_rec = recovery_time_from_histogram(hist)
    assert t_rec == pytest.approx(20 * NS)

    profile = extract_afterpulse_profile(hist, r_b=0.0, t_rec=t_rec, fit_start=200 * NS, n_bootstrap=10, seed=3)
    assert len(profile.profile) == 200
    assert profile.p_total == pytest.approx(0.5)
    assert profile.amplitude == pytest.approx(100.0)
    assert profile.within(40 * NS) == pytest.approx(0.5)
    assert profile.within(35 * NS) == pytest.approx(0.25)
    assert profile.fraction_within(35 * NS) == pytest.approx(0.5)
    assert profile.sigma > 0


def test_afterpulse_profile_keeps_negative_bins():
    profile = AfterpulseProfile(profile=[0.0, 0.01, -0.002], bin_width=NS, p_total=0.008, amplitude=1.0, t_rec=NS)
    assert profile.within(3 * NS) == pytest.approx(0.008)
    assert profile.as_array()[2] < 0


def test_dep_fraction_on_synthetic_histogram():
    tau_r, rate, n_clicks = 20 * NS, 1e6, 1_000_000
    centers = (np.arange(400) + 0.5) * NS
    background = n_clicks * NS * rate * np.exp(-rate * (centers - tau_r))
    counts = np.where(centers > tau_r, np.rint(background), 0.0)
    counts[20:25] += 200
    hist = _histogram(counts.astype(np.int64), n_source_clicks=n_clicks)

    dep = measure_dep_fraction(hist, r=rate, p_a=0.0, tau_r=tau_r)
    assert dep.dep_fraction == pytest.approx(1e-3, abs=2e-5)
    assert dep.sigma > 0

    with pytest.raises(InputError):
        measure_dep_fraction(hist, r=0.0, p_a=0.0, tau_r=tau_r)


def test_reset_time_from_linear_dep_points():
    p_a, t_reset = 0.005, 9 * NS
    rates = [1e6, 2e6, 3e6, 4e6, 2e7]
    points = [DepMeasurement(rate=r, dep_fraction=float(p_a + (1 - p_a) * r * t_reset / 2), sigma=1e-4)
              for r in rates]
    fit = fit_reset_time(points, p_a=p_a)
    assert fit.t_reset == pytest.approx(t_reset, rel=1e-6)
    assert fit.n_points == 4
    assert len(fit.residuals) == 5
    # the saturating model bends below the linear points
    assert fit.residuals[-1] > 0

    with pytest.raises(InsufficientDataError):
        fit_reset_time(points[:1], p_a=p_a)


def test_dep_model_limits():
    assert dep_model(0.0, 0.01, 9 * NS) == pytest.approx(0.01)
    assert dep_model(1e12, 0.01, 9 * NS) == pytest.approx(1.0)


def test_loss_point():
    stream = TimeTagStream(cycles=(np.arange(90) * 10,), tick_duration=1e-6, cycle_length=1000)
    p_lost, sigma = loss_point(stream, r=1e5, p_a=0.0)
    assert p_lost == pytest.approx(0.1)
    assert sigma == pytest.approx(np.sqrt(90) / 100)


def test_dead_time_consistency_on_exact_deficits():
    u, t_reset = 18 * NS, 9 * NS
    ticks = 10_000_000
    streams, rates = [], [1e6, 2e6, 4e6]
    for rate in rates:
        n_clicks = int(round(rate * ticks * NS * np.exp(-rate * u)))
        streams.append(TimeTagStream(cycles=(np.arange(n_clicks) * (ticks // n_clicks),),
                                     tick_duration=NS, cycle_length=ticks, continuous=True))
    check = dead_time_consistency(streams, rates, p_a=0.0, t_reset=t_reset)
    assert check.mean_loss_time == pytest.approx(u, rel=1e-2)
    assert check.t_rec_check == pytest.approx(u + t_reset / 2, rel=1e-2)
    assert check.p_lost == pytest.approx([1 - np.exp(-r * u) for r in rates], abs=1e-4)

    with pytest.raises(InsufficientDataError):
        dead_time_consistency(streams[:1], rates[:1], p_a=0.0, t_reset=t_reset)


def test_shape_factor():
    window = CycleWindow(t_start=0.0, t_end=100 * NS, bin_width=NS)
    pulsed = TimeTagStream(cycles=(np.array([10]), np.array([20, 30]), np.array([]), np.array([40])),
                           tick_duration=NS, cycle_length=200)
    cw = TimeTagStream(cycles=(np.array([5]), np.array([15]), np.array([25]), np.array([35, 45, 55, 150])),
                       tick_duration=NS, cycle_length=200)
    result = shape_factor(pulsed, cw, window, r_b=0.0)
    assert result.n_pulsed == 4 and result.n_cw == 6
    assert result.f_s == pytest.approx(4 / 6)
    assert result.sigma == pytest.approx(np.sqrt(4 + (4 / 6) ** 2 * 6) / 6)

    with pytest.raises(InputError):
        shape_factor(pulsed, TimeTagStream(cycles=(np.array([5]),), tick_duration=NS, cycle_length=200),
                     window, r_b=0.0)
    empty = TimeTagStream(cycles=((),) * 4, tick_duration=NS, cycle_length=200)
    with pytest.raises(ZeroDenominatorError):
        shape_factor(pulsed, empty, window, r_b=0.0)


def test_bootstrap_is_seeded():
    first = bootstrap(lambda rng: rng.normal(), 50, seed=7)
    again = bootstrap(lambda rng: rng.normal(), 50, seed=7, n_jobs=2)
    assert np.array_equal(first, again)

    def flaky(rng):
        if rng.random() < 0.5:
            raise ValueError("refit failed")
        return 1.0

    assert np.all(bootstrap(flaky, 40, seed=1) == 1.0)


def test_report_round_trip(tmp_path):
    report = CharacterizationReport(detector="SPAD1", eta0=0.633, r_b=137.0, ap_total=0.006,
                                    t_dead=14e-9, t_reset=8.7e-9, t_rec=22.7e-9)
    path = report.save(str(tmp_path / "report.json"))
    loaded = CharacterizationReport.load(path)
    assert loaded == report
    assert "SPAD1" in loaded.format_table()

    params = loaded.to_detector_params(eta0=0.6)
    assert params.eta0 == 0.6
    assert params.t_rec == pytest.approx(22.7e-9)

    with pytest.raises(InputError):
        CharacterizationReport(r_b=1.0).to_detector_params()


def test_charfit_settings_ranges():
    with pytest.raises(ValueError):
        CharfitSettings(tail_start=1e-3, ap_max_delay=1e-4)
