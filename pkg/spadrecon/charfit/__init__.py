"""
Detector characterization from delay histograms

Order of use: background rate, afterpulse profile and recovery time (dark
data), then count rates, DEP fractions and the reset time (cw rate sweep),
and finally the shape factor of the pulse.
"""

from spadrecon.charfit.afterpulse import extract_afterpulse_profile, recovery_time_from_histogram
from spadrecon.charfit.background import fit_background_rate
from spadrecon.charfit.bootstrap import bootstrap, spawn_generators
from spadrecon.charfit.count_rate import default_fit_start, first_and_n_density, fit_count_rate
from spadrecon.charfit.dep import (
    dead_time_consistency,
    dep_model,
    fit_reset_time,
    loss_point,
    measure_dep_fraction,
)
from spadrecon.charfit.schemas import (
    AfterpulseProfile,
    BackgroundFit,
    CharacterizationReport,
    CharfitSettings,
    CountRateFit,
    DeadTimeCheck,
    DepMeasurement,
    ResetTimeFit,
    ShapeFactor,
)
from spadrecon.charfit.shape import shape_factor

__all__ = [
    "fit_count_rate",
    "default_fit_start",
    "first_and_n_density",
    "fit_background_rate",
    "extract_afterpulse_profile",
    "recovery_time_from_histogram",
    "measure_dep_fraction",
    "fit_reset_time",
    "dep_model",
    "loss_point",
    "dead_time_consistency",
    "shape_factor",
    "bootstrap",
    "spawn_generators",
    "CountRateFit",
    "BackgroundFit",
    "AfterpulseProfile",
    "DepMeasurement",
    "ResetTimeFit",
    "DeadTimeCheck",
    "ShapeFactor",
    "CharacterizationReport",
    "CharfitSettings",
]
