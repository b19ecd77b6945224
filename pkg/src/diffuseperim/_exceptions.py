from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ._minimizer import MinimizerResult


class DiffusePerimError(Exception):
    pass


class NonAdmissible(DiffusePerimError):
    """Raised when a potential violates the double-well assumptions."""


class QuadratureFailure(DiffusePerimError):
    pass


class ProfileMismatch(DiffusePerimError):
    """Raised when the quadrature and ODE constructions of the profile disagree."""


class BracketFailure(DiffusePerimError):
    pass


class GridMismatch(DiffusePerimError, ValueError):
    """Raised when fields that must share a grid do not, or a grid is inconsistent."""


class RegimeViolation(DiffusePerimError):
    """Raised when ε is too large for the radius, or for the grid to resolve."""


class NoConvergence(DiffusePerimError):
    def __init__(self, message: str, result: MinimizerResult | None = None):
        super().__init__(message)
        self.result = result


class NoDecayingSolution(DiffusePerimError):
    pass


class HypothesisViolation(DiffusePerimError):
    pass


class NoBeta(DiffusePerimError):
    pass


class ConfigError(DiffusePerimError):
    pass
