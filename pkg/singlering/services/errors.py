"""
Exception hierarchy shared by the services, the CLI and the HTTP routers.
"""
from typing import Any, Optional


class SingleRingError(Exception):
    """Base class for all errors raised by the toolkit."""


class MeasureDomainError(SingleRingError, ValueError):
    """Invalid atoms, or a measure functional evaluated outside its domain."""


class EnsembleDomainError(SingleRingError, ValueError):
    """Invalid ensemble parameters (empty matrix, negative diagonal entries)."""


class ConfigError(SingleRingError, ValueError):
    """Invalid experiment configuration."""


class DivergenceError(SingleRingError, ValueError):
    """A majorizing series was evaluated outside its disc of convergence."""


class NumericalFailure(SingleRingError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class ConvergenceError(NumericalFailure):
    """The fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float, z1: complex):
        super().__init__(message)
        self.residual = residual
        self.z1 = z1


class BranchError(NumericalFailure):
    """The principal square-root branch lost its certificate on the continuation path."""

    def __init__(self, message: str, last_good: Optional[Any] = None):
        super().__init__(message)
        self.last_good = last_good


class ResolutionError(NumericalFailure):
    """A grid is too coarse for the requested derived quantity."""


# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, NumericalFailure):
        return EXIT_NUMERIC
    return EXIT_CONFIG
