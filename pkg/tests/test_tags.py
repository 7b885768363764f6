"""
Tests for time-tag files, delay histograms, photon profiles and click distributions
"""

import numpy as np
import pytest

from spadrecon.core import CycleWindow, TICK_DURATION
from spadrecon.errors import InputError, NoSingleClickCyclesError, NonMonotonicTagsError, ParseError
from spadrecon.tags import (
    HistogramKind,
    TimeTagStream,
    click_number_distribution,
    estimate_photon_profile,
    first_and_n_histogram,
    full_correlation_histogram,
    read_time_tags,
    stream_from_seconds,
    write_time_tags,
)


def _delays(histogram):
    """Bin indices repeated by count (bin width 1 tick gives the delays themselves)"""
    return sorted(np.repeat(np.arange(histogram.n_bins), histogram.counts).tolist())


def _stream(*cycles, cycle_length=200):
    return TimeTagStream(cycles=tuple(np.asarray(c) for c in cycles), cycle_length=cycle_length)


def _window(start_ticks, end_ticks, bin_ticks=1):
    return CycleWindow(t_start=start_ticks * TICK_DURATION, t_end=end_ticks * TICK_DURATION,
                       bin_width=bin_ticks * TICK_DURATION)


def test_stream_invariants():
    stream = _stream([0, 10, 25], [], [5])
    assert stream.n_cycles == 3
    assert stream.total_clicks == 4
    assert stream.clicks_per_cycle().tolist() == [3, 0, 1]
    assert stream.collection_time == pytest.approx(3 * 200 * TICK_DURATION)

    with pytest.raises(NonMonotonicTagsError) as info:
        _stream([0, 10], [7, 7])
    assert info.value.cycle_index == 1
    with pytest.raises(InputError):
        _stream([0, 250])


def test_first_and_two():
    histogram = first_and_n_histogram(_stream([0, 10, 25, 100]), 2, bin_width=1)
    assert histogram.kind == HistogramKind.FIRST_AND_N
    assert _delays(histogram) == [10, 15, 75]


def test_first_and_three():
    histogram = first_and_n_histogram(_stream([0, 10, 25, 100]), 3, bin_width=1)
    assert _delays(histogram) == [25, 90]


def test_first_and_n_total_and_cycle_boundaries():
    stream = _stream([0, 10, 25, 100], [3], [1, 2, 3], [])
    for n in (2, 3, 4):
        expected = sum(max(0, c - (n - 1)) for c in (4, 1, 3, 0))
        assert first_and_n_histogram(stream, n, bin_width=1).total == expected
    # no pair across cycles: 100 -> 3 in the next cycle is never counted
    assert _delays(first_and_n_histogram(stream, 2, bin_width=1)) == [1, 1, 10, 15, 75]


def test_first_and_n_max_delay_and_binning():
    stream = _stream([0, 10, 25, 100])
    cut = first_and_n_histogram(stream, 2, bin_width=1, max_delay=20)
    assert cut.n_bins == 20
    assert _delays(cut) == [10, 15]

    coarse = first_and_n_histogram(stream, 2, bin_width=6)
    assert coarse.counts[1] == 1 and coarse.counts[2] == 1 and coarse.counts[12] == 1

    with pytest.raises(InputError):
        first_and_n_histogram(stream, 1)


def test_full_correlation():
    histogram = full_correlation_histogram(_stream([0, 10, 25]), bin_width=1, max_delay=100)
    assert histogram.kind == HistogramKind.FULL_CORRELATION
    assert histogram.n_bins == 100
    assert _delays(histogram) == [10, 15, 25]

    short = full_correlation_histogram(_stream([0, 10, 25]), bin_width=1, max_delay=20)
    assert _delays(short) == [10, 15]


def test_full_correlation_of_empty_stream():
    histogram = full_correlation_histogram(_stream(cycle_length=50), bin_width=5)
    assert histogram.n_bins == 10
    assert histogram.total == 0
    assert histogram.peak_delay() is None
    assert histogram.first_nonzero_delay() is None


def test_parallel_histograms_match_serial():
    rng = np.random.default_rng(3)
    cycles = [np.unique(rng.integers(0, 5000, size=rng.integers(0, 6))) for _ in range(10_000)]
    stream = TimeTagStream(cycles=tuple(cycles), cycle_length=5000)
    serial = first_and_n_histogram(stream, 2, bin_width=6)
    parallel = first_and_n_histogram(stream, 2, bin_width=6, n_jobs=2)
    assert np.array_equal(serial.counts, parallel.counts)
    serial = full_correlation_histogram(stream, bin_width=60)
    parallel = full_correlation_histogram(stream, bin_width=60, n_jobs=2)
    assert np.array_equal(serial.counts, parallel.counts)


def test_histogram_text_export(tmp_path):
    histogram = first_and_n_histogram(_stream([0, 10, 25, 100]), 2, bin_width=5)
    path = histogram.to_text(str(tmp_path / "out" / "hist.txt"))
    data = np.loadtxt(path)
    assert data.shape == (histogram.n_bins, 2)
    assert data[:, 1].sum() == 3
    assert data[1, 0] == pytest.approx(5 * TICK_DURATION)


def test_text_round_trip(tmp_path):
    stream = _stream([0, 10, 25, 100], [], [7], [], cycle_length=150)
    path = write_time_tags(stream, str(tmp_path / "tags.txt"))
    loaded = read_time_tags(path)
    assert loaded.n_cycles == 4
    assert loaded.cycle_length == 150
    assert loaded.total_clicks == 5
    assert loaded.tick_duration == pytest.approx(TICK_DURATION)
    assert [c.tolist() for c in loaded.cycles] == [[0, 10, 25, 100], [], [7], []]


def test_binary_round_trip(tmp_path):
    stream = TimeTagStream(cycles=(np.array([3, 2 ** 40]),), cycle_length=2 ** 41, continuous=True)
    loaded = read_time_tags(write_time_tags(stream, str(tmp_path / "tags.bin")))
    assert loaded.continuous
    assert loaded.cycle_length == 2 ** 41
    assert loaded.cycles[0].tolist() == [3, 2 ** 40]


def test_two_cycle_fixture(tmp_path):
    path = tmp_path / "fixture.txt"
    path.write_text("#tick_ps=164.6\n#cycle_ticks=1000\n0\t12\n0\t480\n\n1\t33\n", encoding="utf-8")
    stream = read_time_tags(str(path))
    assert stream.n_cycles == 2
    assert stream.total_clicks == 3


def test_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("", encoding="utf-8")
    stream = read_time_tags(str(path))
    assert stream.total_clicks == 0
    assert stream.n_cycles == 0


def test_shuffled_file(tmp_path):
    path = tmp_path / "shuffled.txt"
    path.write_text("#cycle_ticks=1000\n0\t12\n1\t480\n1\t33\n", encoding="utf-8")
    with pytest.raises(NonMonotonicTagsError) as info:
        read_time_tags(str(path))
    assert info.value.cycle_index == 1


def test_malformed_files(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("#cycle_ticks=1000\n0\t12\n0 12 13\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_time_tags(str(path))
    assert info.value.line == 3

    path.write_text("0\tabc\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_time_tags(str(path))

    binary = tmp_path / "bad.bin"
    binary.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ParseError) as info:
        read_time_tags(str(binary))
    assert info.value.offset == 0

    with pytest.raises(FileNotFoundError):
        read_time_tags(str(tmp_path / "missing.txt"))


def test_click_number_distribution():
    stream = _stream([], [50], [60], [40, 90])
    window = _window(0, 100)
    assert click_number_distribution(stream, window).to_list() == pytest.approx([0.25, 0.5, 0.25])
    # a window excluding every click
    assert click_number_distribution(stream, _window(100, 150), n_max=3).to_list() == [1.0, 0.0, 0.0, 0.0]


def test_click_number_distribution_folds_overflow():
    stream = _stream([1, 2, 3], [1], [], [])
    dist = click_number_distribution(stream, _window(0, 100), n_max=2)
    assert dist.to_list() == pytest.approx([0.5, 0.25, 0.25])


def test_photon_profile_from_single_click_cycles():
    stream = _stream([], [], [7], [3, 8], [])
    profile = estimate_photon_profile(stream, _window(0, 10, bin_ticks=2))
    expected = np.zeros(5)
    expected[3] = 1.0
    assert profile.values == pytest.approx(expected)

    shuffled = _stream([3, 8], [7], [], [], [])
    assert estimate_photon_profile(shuffled, _window(0, 10, bin_ticks=2)).values == pytest.approx(expected)

    with pytest.raises(NoSingleClickCyclesError):
        estimate_photon_profile(_stream([], [1, 2]), _window(0, 10))


def test_stream_from_seconds():
    stream = stream_from_seconds([[0.0, 10e-9], [5e-9]], cycle_length=100e-9, tick_duration=1e-9)
    assert [c.tolist() for c in stream.cycles] == [[0, 10], [5]]
    assert stream.cycle_length == 100
