"""
Time-tag ingestion, delay histograms, photon profile and click statistics
"""

from spadrecon.tags.extraction import click_number_distribution, clicks_in_window, estimate_photon_profile
from spadrecon.tags.histograms import (
    DelayHistogram,
    HistogramKind,
    first_and_n_histogram,
    full_correlation_histogram,
)
from spadrecon.tags.stream import TimeTagStream, read_time_tags, stream_from_seconds, write_time_tags

__all__ = [
    "TimeTagStream",
    "read_time_tags",
    "write_time_tags",
    "stream_from_seconds",
    "DelayHistogram",
    "HistogramKind",
    "first_and_n_histogram",
    "full_correlation_histogram",
    "estimate_photon_profile",
    "click_number_distribution",
    "clicks_in_window",
]
