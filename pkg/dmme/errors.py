"""
errors.py - Exception types raised across the dmme package.

Every error derives from DMMEError and from the builtin a plain script would
raise for the same problem, so callers can catch either.
"""

from typing import Optional


class DMMEError(Exception):
    """Base class for all package errors."""


class DomainError(DMMEError, ValueError):
    """Argument outside the domain of a physical formula."""


class DegenerateInvariantError(DMMEError, ValueError):
    """An invariant eigenvalue pair collapsed to zero."""


class AdmissibilityError(DMMEError, ValueError):
    """The ansatz would need an imaginary g6(t)."""

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


class UnsupportedTemperatureError(DMMEError, ValueError):
    """Lamb shift requested at finite reservoir temperature."""


class InconsistentRateError(DMMEError, ValueError):
    """A negative decay rate reached the generator builder."""


class NonUnitaryError(DMMEError, ValueError):
    """Picture change attempted with a non-unitary operator."""


class IntegrationError(DMMEError, RuntimeError):
    """The ODE solver gave up (step-size underflow or similar)."""


class ToleranceError(DMMEError, RuntimeError):
    """A trajectory drifted outside the density-matrix tolerances."""


class NoSignChangeError(DMMEError, ValueError):
    """A threshold scan found no sign change in its bracket."""


class ConfigError(DMMEError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
