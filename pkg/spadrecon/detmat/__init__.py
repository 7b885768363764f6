"""Detector matrix factors (loss, background, afterpulsing) and their composition with R"""
from .factors import (
    build_loss_matrix,
    build_background_matrix,
    build_afterpulse_matrix,
    afterpulse_window_probability,
    afterpulse_split_count,
    rebin_profile,
)
from .composition import DetectorMatrix, compose, build_detector_matrix

__all__ = [
    'build_loss_matrix', 'build_background_matrix', 'build_afterpulse_matrix',
    'afterpulse_window_probability', 'afterpulse_split_count', 'rebin_profile',
    'DetectorMatrix', 'compose', 'build_detector_matrix',
]
