"""EME reconstruction and the metrics used to judge it"""
from .schemas import EmeConfig, ReconstructionResult, CalibrationInputs
from .reconstruction import EmeStep, eme_reconstruct, iterate_eme, log_likelihood
from .metrics import total_variation_distance, fit_poissonian, g2_reconstructed, expected_nbar, delta_nbar

__all__ = [
    'EmeConfig', 'ReconstructionResult', 'CalibrationInputs',
    'EmeStep', 'eme_reconstruct', 'iterate_eme', 'log_likelihood',
    'total_variation_distance', 'fit_poissonian', 'g2_reconstructed', 'expected_nbar', 'delta_nbar',
]
