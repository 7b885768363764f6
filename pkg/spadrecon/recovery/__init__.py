"""Recovery-time effects: photon event strings, their integrals, and the matrix R"""
from .events import (
    EventSymbol,
    EventString,
    enumerate_events,
    expand_string,
    symbol_strings,
    click_count,
    parse_event,
    format_event,
)
from .integrals import EventIntegrator, event_probability, normalization_constant
from .matrix import RecoveryMatrix, build_recovery_matrix

__all__ = [
    'EventSymbol', 'EventString', 'enumerate_events', 'expand_string', 'symbol_strings',
    'click_count', 'parse_event', 'format_event',
    'EventIntegrator', 'event_probability', 'normalization_constant',
    'RecoveryMatrix', 'build_recovery_matrix',
]
