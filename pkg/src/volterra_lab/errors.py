"""Exception hierarchy.

Every numeric failure carries the label of the module that raised it so the
command line runner can report where an experiment broke down.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all errors raised by this package."""

    module = "volterra_lab"

    def __init__(self, message: str, module: str | None = None) -> None:
        super().__init__(message)
        if module is not None:
            self.module = module

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class DomainError(LabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class AlignmentError(DomainError):
    """A time point is not a node of the simulation grid."""


class InsufficientDataError(DomainError):
    """A regression was asked to fit fewer points than it needs."""


class NumericalFailure(LabError, RuntimeError):
    """A computation ran but did not produce a trustworthy number."""


class QuadratureError(NumericalFailure):
    """Successive quadrature refinements disagree."""


class PathOverflowError(NumericalFailure):
    """A simulated path left the configured magnitude bound."""


class NoContractionError(NumericalFailure):
    """The Picard map could not be made contractive on any admissible window."""


class ConfigError(LabError, ValueError):
    """An experiment configuration failed validation."""

    module = "config"
