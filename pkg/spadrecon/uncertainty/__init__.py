"""
Monte Carlo uncertainty propagation for reconstructions
"""

from spadrecon.uncertainty.propagation import DEFAULT_MC_SAMPLES, propagate
from spadrecon.uncertainty.schemas import SOURCES, UncertaintyReport

__all__ = ["propagate", "UncertaintyReport", "SOURCES", "DEFAULT_MC_SAMPLES"]
