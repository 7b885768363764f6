"""
Tests for recovery events, their nested integrals and the recovery matrix R
"""

import itertools
import math
from collections import Counter, defaultdict

import numpy as np
import pytest

from spadrecon.core import LossProfileModel, flat_profile, gaussian_profile
from spadrecon.errors import InputError, NumericalUnderflowError
from spadrecon.core.profiles import PhotonProfile
from spadrecon.recovery import (
    EventIntegrator,
    EventSymbol,
    build_recovery_matrix,
    click_count,
    enumerate_events,
    event_probability,
    expand_string,
    normalization_constant,
    parse_event,
    symbol_strings,
)

BIN = 1e-9


def _events_by_text(n, order):
    return {str(event): event for event in enumerate_events(n, order)}


def test_two_photon_events():
    events = _events_by_text(2, 1)
    assert set(events) == {"[★][★]", "[★∘]", "[★●]"}
    assert click_count(events["[★][★]"]) == 2
    assert click_count(events["[★∘]"]) == 1
    assert click_count(events["[★●]"]) == 2


def test_order_zero_keeps_only_armed_photons():
    events = enumerate_events(4, 0)
    assert [str(e) for e in events] == ["[★][★][★][★]"]
    assert click_count(events[0]) == 4


def test_symbol_strings_respect_order():
    strings = list(symbol_strings(4, 2))
    assert all(s[0] == EventSymbol.ARMED for s in strings)
    assert all(sum(1 for x in s if x != EventSymbol.ARMED) <= 2 for s in strings)
    # 1 + 3 * 2 + 3 * 4
    assert len(strings) == 19


def test_mixed_string_expansion():
    events = expand_string(parse_event("[★●∘●●]").symbols)
    assert len(events) == 6
    assert len({str(e) for e in events}) == 6
    assert Counter(click_count(e) for e in events) == Counter({2: 1, 3: 3, 4: 2})


def test_enumeration_has_no_duplicates():
    for n in range(1, 6):
        for order in range(0, n):
            texts = [str(e) for e in enumerate_events(n, order)]
            assert len(texts) == len(set(texts))
            assert all(parse_event(t).photon_count == n for t in texts)


def test_parse_and_format_with_ascii_aliases():
    event = parse_event("[*@][o]")
    assert str(event) == "[★●][∘]"
    assert parse_event(str(event)) == event
    assert event.non_armed_count == 2


@pytest.mark.parametrize("text", ["[★●", "★]", "[★[●]]", "[★x]", "[∘]", "[★][●]", "[★∘][∘]"])
def test_parse_rejects_malformed_events(text):
    with pytest.raises(InputError):
        parse_event(text)


def test_normalization_constant():
    profile = gaussian_profile(60 * BIN, BIN, center=30 * BIN, fwhm=10 * BIN)
    assert normalization_constant(profile, 1) == pytest.approx(1.0)
    assert normalization_constant(profile, 2) == pytest.approx(0.5)
    assert normalization_constant(profile, 3) == pytest.approx(1.0 / 6.0, rel=2e-2)


def test_two_photon_probabilities_with_binary_loss():
    n_bins, k = 100, 20
    profile = flat_profile(n_bins * BIN, BIN)
    loss = LossProfileModel(t_dead=k * BIN, t_rec=k * BIN)
    events = _events_by_text(2, 1)

    both = event_probability(events["[★][★]"], profile, loss)
    lost = event_probability(events["[★∘]"], profile, loss)
    twilight = event_probability(events["[★●]"], profile, loss)

    # ordered pairs at least k bins apart, ties in a bin counted half
    assert both == pytest.approx((n_bins - k) * (n_bins - k + 1) / n_bins ** 2, abs=1e-9)
    assert both == pytest.approx((1 - k / n_bins) ** 2, abs=2.0 / n_bins)
    assert twilight == pytest.approx(0.0, abs=1e-12)
    assert both + lost + twilight == pytest.approx(1.0, abs=1e-9)


def test_event_probabilities_partition_unity():
    profile = gaussian_profile(80 * BIN, BIN, center=40 * BIN, fwhm=30 * BIN)
    loss = LossProfileModel(t_dead=6 * BIN, t_rec=10 * BIN)
    integrator = EventIntegrator(profile, loss)
    for n in (2, 3):
        total = sum(integrator.probability(e) for e in enumerate_events(n, n - 1))
        assert total == pytest.approx(1.0, abs=1e-6)


def _oracle_fixture(bins_per_ns=1):
    profile = gaussian_profile(24 * BIN, BIN / bins_per_ns, center=12 * BIN, fwhm=14 * BIN)
    return profile, LossProfileModel(t_dead=BIN, t_rec=4 * BIN)


def _brute_force_events(n_photons, profile, loss):
    """
    Walk the detector through every placement of n photons on the bin grid

    Photons sharing a bin get the same delay and are taken in either order.

    Returns:
        Probability per event text, click counts seen per event text, and the
        probability that three or more photons share a bin
    """
    k_bins, loss_values = loss.discretize(profile.bin_width)
    masses = profile.bin_masses()
    probabilities, clicks = defaultdict(float), defaultdict(set)
    crowded = 0.0

    def walk(times, index, ref, pending, groups, n_clicks, weight):
        if index == len(times):
            text = "".join(f"[{group}]" for group in groups)
            probabilities[text] += weight
            clicks[text].add(n_clicks + pending)
            return
        t = times[index]
        opened = False
        while ref is not None and t - ref >= k_bins:
            if pending:
                # the twilight click ends this period and starts the next
                ref, pending, n_clicks, opened = ref + k_bins, False, n_clicks + 1, True
            else:
                ref = None
        if ref is None:
            walk(times, index + 1, t, False, groups + ["★"], n_clicks + 1, weight)
            return
        lost = loss_values[t - ref]
        for symbol, factor in (("∘", lost), ("●", 1.0 - lost)):
            if factor <= 0:
                continue
            grown = groups + [symbol] if opened else groups[:-1] + [groups[-1] + symbol]
            walk(times, index + 1, ref, pending or symbol == "●", grown, n_clicks, weight * factor)

    for times in itertools.combinations_with_replacement(range(profile.n_bins), n_photons):
        occupancy = Counter(times).values()
        weight = math.factorial(n_photons) / math.prod(math.factorial(c) for c in occupancy)
        weight *= float(np.prod(masses[list(times)]))
        if max(occupancy) >= 3:
            crowded += weight
        walk(times, 0, None, False, [], 0, weight)
    return probabilities, clicks, crowded


@pytest.mark.parametrize("n, bins_per_ns", [(1, 1), (2, 1), (3, 1), (4, 1), (3, 2)])
def test_event_integrals_match_brute_force_walk(n, bins_per_ns):
    profile, loss = _oracle_fixture(bins_per_ns)
    probabilities, clicks, crowded = _brute_force_events(n, profile, loss)
    integrator = EventIntegrator(profile, loss)
    events = _events_by_text(n, n - 1)

    assert set(probabilities) == set(events)
    assert sum(probabilities.values()) == pytest.approx(1.0, abs=1e-12)
    # the grid measure weights a pair sharing a bin by 1/2, which is exact;
    # it only departs from the walk when three photons share a bin
    tolerance = 5.0 * crowded + 1e-12
    for text, event in events.items():
        assert clicks[text] == {click_count(event)}
        assert integrator.probability(event) == pytest.approx(probabilities[text], abs=tolerance)


def test_event_counts_without_order_cap():
    assert [len(enumerate_events(n, n)) for n in (1, 2, 3, 4)] == [1, 3, 11, 43]


def test_event_probabilities_settle_under_bin_refinement():
    for n in (2, 3):
        events = enumerate_events(n, n - 1)
        levels = []
        for bins_per_ns in (1, 2, 4):
            integrator = EventIntegrator(*_oracle_fixture(bins_per_ns))
            levels.append(np.array([integrator.probability(event) for event in events]))
        coarse = np.abs(levels[1] - levels[0]).max()
        fine = np.abs(levels[2] - levels[1]).max()
        assert fine < coarse
        assert fine < 0.05
        assert levels[2].sum() == pytest.approx(1.0, abs=1e-9)


def test_zero_profile_underflows():
    profile = PhotonProfile(bin_width=BIN, values=np.zeros(10))
    event = enumerate_events(2, 0)[0]
    with pytest.raises(NumericalUnderflowError):
        event_probability(event, profile, LossProfileModel(t_dead=BIN, t_rec=2 * BIN))


def test_ideal_loss_gives_identity():
    profile = flat_profile(50 * BIN, BIN)
    recovery = build_recovery_matrix(profile, LossProfileModel.ideal(), n_max=5, order=2)
    assert recovery.matrix == pytest.approx(np.eye(6))


def test_recovery_matrix_columns():
    profile = flat_profile(200 * BIN, BIN)
    loss = LossProfileModel(t_dead=14 * BIN, t_rec=23 * BIN)
    recovery = build_recovery_matrix(profile, loss, n_max=6, order=2)
    matrix = recovery.matrix

    assert recovery.n_max == 6
    assert recovery.order == 2
    assert matrix.sum(axis=0) == pytest.approx(np.ones(7), abs=1e-9)
    assert np.all(matrix >= 0)
    assert matrix[0, 0] == 1.0
    assert matrix[1, 1] == pytest.approx(1.0)
    # recovery effects only ever lose or postpone clicks within the window
    assert np.allclose(np.triu(matrix, 1), 0.0)
    for n in (2, 3):
        assert recovery.raw_column_sums[n] == pytest.approx(1.0, abs=1e-6)


def test_recovery_matrix_window_check():
    profile = flat_profile(50 * BIN, BIN)
    loss = LossProfileModel(t_dead=5 * BIN, t_rec=8 * BIN)
    with pytest.raises(InputError):
        build_recovery_matrix(profile, loss, n_max=3, order=1, window=80 * BIN)
    with pytest.raises(InputError):
        build_recovery_matrix(profile, loss, n_max=3, order=-1)


def test_recovery_matrix_parallel_matches_serial():
    profile = gaussian_profile(60 * BIN, BIN, center=30 * BIN, fwhm=20 * BIN)
    loss = LossProfileModel(t_dead=5 * BIN, t_rec=9 * BIN)
    serial = build_recovery_matrix(profile, loss, n_max=5, order=2)
    parallel = build_recovery_matrix(profile, loss, n_max=5, order=2, n_jobs=2)
    assert np.allclose(serial.matrix, parallel.matrix)
