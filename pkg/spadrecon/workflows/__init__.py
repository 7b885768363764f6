"""
End-to-end pipelines: detector characterization and stream reconstruction
"""

from spadrecon.workflows.characterization_workflow import CharacterizationWorkflow, characterize_detector
from spadrecon.workflows.reconstruction_workflow import (
    ReconstructionOutcome,
    estimate_n_max,
    reconstruct_distribution,
    reconstruct_stream,
    select_recovery_order,
)

__all__ = [
    "CharacterizationWorkflow",
    "characterize_detector",
    "ReconstructionOutcome",
    "estimate_n_max",
    "reconstruct_distribution",
    "reconstruct_stream",
    "select_recovery_order",
]
