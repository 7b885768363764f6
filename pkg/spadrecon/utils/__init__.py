"""Utility modules"""
from .run_tracker import RunTracker, StageRecord, get_global_tracker, reset_global_tracker, track_stage
from .parameter_substitution import find_placeholders, substitute_parameters, substitute_in_mapping, validate_parameters

__all__ = [
    'RunTracker', 'StageRecord', 'get_global_tracker', 'reset_global_tracker', 'track_stage',
    'find_placeholders', 'substitute_parameters', 'substitute_in_mapping', 'validate_parameters',
]
