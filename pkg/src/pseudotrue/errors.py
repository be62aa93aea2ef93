"""Exception hierarchy shared by every module."""

from __future__ import annotations

from typing import Any


class PseudoTrueError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PseudoTrueError, ValueError):
    """Invalid user-supplied parameter or configuration."""


class SpecificationError(PseudoTrueError, ValueError):
    """A model specification violates its own invariants (e.g. a negative graphon)."""


class UsageError(PseudoTrueError, ValueError):
    """Inputs with mutually inconsistent shapes."""


class NumericalError(PseudoTrueError, RuntimeError):
    """A numerical routine failed; ``diagnostics`` carries what is known about why."""

    def __init__(self, message: str, **diagnostics: Any) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class EquilibriumError(NumericalError):
    """Market clearing could not be reached within tolerance."""


class EstimationError(NumericalError):
    """An estimator could not be evaluated (e.g. singular U'Z)."""


class UndefinedExposureError(PseudoTrueError, ArithmeticError):
    """Conditioning on an exposure value of probability zero."""


class StudyFailure(PseudoTrueError, RuntimeError):
    """Too many Monte Carlo replications failed."""
