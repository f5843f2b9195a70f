"""
Error Types for pyphsim

Every failure the toolkit raises on purpose derives from PhsError and from
the builtin exception a caller would naturally catch (ValueError for bad
input, RuntimeError for solver failures, ...).
"""

from typing import List, Optional, Sequence


class PhsError(Exception):
    """Base class of all pyphsim errors."""


class DimensionError(PhsError, ValueError):
    """Operand shapes do not agree."""


class SingularMatrixError(PhsError, ArithmeticError):
    """
    A dense factorization met a (numerically) zero pivot.

    Attributes:
        pivot: Index of the offending pivot
    """

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class RangeError(PhsError, OverflowError):
    """A computed quantity left the range of finite floats."""


class ModelError(PhsError, ValueError):
    """
    A model description violates a structural requirement.

    Attributes:
        diagnostics: Human readable findings, one per violated requirement
    """

    def __init__(self, message: str, diagnostics: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.diagnostics: List[str] = list(diagnostics or [message])


class SymmetryError(ModelError):
    """P_k fails P_k^* = (-1)^(k+1) P_k."""


class DissipativityError(ModelError):
    """The symmetric part of P_0 is not negative semidefinite."""


class CoercivityError(ModelError):
    """H is not uniformly positive definite (or not self-adjoint)."""


class SingularLeadingMatrixError(ModelError):
    """P_N is not invertible."""


class SingularBoundaryError(ModelError):
    """The input/output port map is not invertible on the trace space."""


class UnsupportedFeatureError(PhsError, NotImplementedError):
    """The requested computation is outside what is implemented."""


class NotPassiveError(PhsError, ArithmeticError):
    """The boundary system of the resolvent problem is singular."""


class GridError(PhsError, ValueError):
    """The spatial grid is too coarse or malformed."""


class FactorizationError(PhsError, RuntimeError):
    """A discrete operator could not be factored."""


class NonConvergenceError(PhsError, RuntimeError):
    """
    An iteration hit its cap before meeting the tolerance.

    Attributes:
        residual_history: Residual after every iteration
        rho: Contraction factor estimate, when the iteration has one
    """

    def __init__(
        self,
        message: str,
        residual_history: Optional[Sequence[float]] = None,
        rho: Optional[float] = None
    ):
        super().__init__(message)
        self.residual_history: List[float] = list(residual_history or [])
        self.rho = rho


class ProfileMismatchError(PhsError, ValueError):
    """A stability profile was requested for a model it does not fit."""


class UndefinedFitError(PhsError, ValueError):
    """The decay fit has too little usable data."""


class ScenarioError(PhsError, KeyError):
    """Unknown scenario name."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class OverrideError(PhsError, ValueError):
    """A scenario override names an unknown key or an invalid value."""


class ConfigError(PhsError, ValueError):
    """A run configuration is malformed."""
