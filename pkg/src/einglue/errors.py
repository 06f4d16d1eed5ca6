"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NoPositiveRootError(DomainError):
    """V_a has no positive zero (a > a_max(n))."""


class ConfigurationError(ValueError):
    """Inconsistent parameters for a glued metric or a scenario."""


class NumericError(RuntimeError):
    """Quadrature, fitting or another numeric step failed."""


class SolverError(NumericError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
