"""
Monte Carlo SPAD simulator used as the oracle for matrices, fits and reconstructions
"""

from spadrecon.sim.schemas import SimConfig, SimMode, SimSpec, SimTallies
from spadrecon.sim.simulator import SimResult, simulate, simulate_cw, simulate_with_tallies
from spadrecon.sim.sources import (
    DistributionSource,
    DriftingPoissonSource,
    FockMixtureSource,
    PhotonSource,
    PoissonSource,
    source_from_spec,
)

__all__ = [
    "SimConfig",
    "SimMode",
    "SimSpec",
    "SimTallies",
    "SimResult",
    "simulate",
    "simulate_cw",
    "simulate_with_tallies",
    "PhotonSource",
    "PoissonSource",
    "FockMixtureSource",
    "DriftingPoissonSource",
    "DistributionSource",
    "source_from_spec",
]
