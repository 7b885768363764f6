"""
Exception hierarchy for spadrecon

Two branches hang off SpadReconError:
- InputError: the caller handed over something unusable (CLI exit code 2)
- FitError: a fit or iterative solver failed on valid input (CLI exit code 3)
"""

from typing import Optional


class SpadReconError(Exception):
    """Root of all spadrecon errors"""


class InputError(SpadReconError, ValueError):
    """Invalid input data or parameters"""


class FitError(SpadReconError, RuntimeError):
    """A fit or solver did not produce a usable result"""


# Input branch

class AllZeroError(InputError):
    """Every entry of a vector to normalize is <= 0"""


class DimensionMismatchError(InputError):
    """Vectors or matrices with incompatible shapes"""


class ZeroMeanError(InputError):
    """Distribution mean is zero where a ratio needs it"""


class ZeroDenominatorError(InputError):
    """Background-subtracted reference count is not positive"""


class NumericalUnderflowError(InputError):
    """Normalization constant vanished (photon profile identically zero)"""


class ConfigError(InputError):
    """Malformed or inconsistent run configuration"""


class NoSingleClickCyclesError(InputError):
    """No cycle with exactly one click inside the window"""


class ParseError(InputError):
    """Time-tag file could not be parsed"""

    def __init__(self, message: str, line: Optional[int] = None, offset: Optional[int] = None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte offset {offset})"
        super().__init__(f"{message}{where}")


class NonMonotonicTagsError(InputError):
    """Click times not strictly increasing inside a cycle"""

    def __init__(self, cycle_index: int, message: str = ""):
        self.cycle_index = cycle_index
        super().__init__(message or f"Click times in cycle {cycle_index} are not strictly increasing")


# Fit branch

class NotConvergedError(FitError):
    """Iterative solver hit its iteration cap"""


class SingularDenominatorError(FitError):
    """Predicted click probability vanished for an observed click number"""


class FitDivergedError(FitError):
    """Least-squares fit failed or returned non-finite parameters"""


class InsufficientDataError(FitError):
    """Not enough data in the fit region"""


class TooManyDroppedSamplesError(FitError):
    """Too many Monte Carlo samples failed"""
