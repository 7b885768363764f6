"""Core domain types: number distributions, temporal profiles, detector and window schemas"""
from .distributions import (
    NumberDistribution,
    normalize,
    poisson_pmf_vector,
    default_n_max,
    total_variation,
    dead_time_corrected_rate,
)
from .profiles import (
    PhotonProfile,
    LossProfileModel,
    flat_profile,
    gaussian_profile,
    square_pulse_profile,
    hyperexponential_afterpulse_profile,
)
from .schemas import DetectorParams, CycleWindow, TICK_DURATION, DEFAULT_BIN_TICKS, DEFAULT_BIN_WIDTH

__all__ = [
    'NumberDistribution', 'normalize', 'poisson_pmf_vector', 'default_n_max', 'total_variation',
    'dead_time_corrected_rate',
    'PhotonProfile', 'LossProfileModel', 'flat_profile', 'gaussian_profile', 'square_pulse_profile',
    'hyperexponential_afterpulse_profile',
    'DetectorParams', 'CycleWindow', 'TICK_DURATION', 'DEFAULT_BIN_TICKS', 'DEFAULT_BIN_WIDTH',
]
