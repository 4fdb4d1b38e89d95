"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FmkError(Exception):
    """Base class for all library errors."""


class ExprError(FmkError, ValueError):
    """Expression text could not be turned into a tree."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class ExprSyntaxError(ExprError):
    pass


class UnknownSymbolError(ExprError):
    pass


class ArityError(ExprError):
    pass


class DomainError(FmkError, ValueError):
    """A function was evaluated outside its real domain (e.g. log of a non-positive value)."""


class NonInvertible(FmkError, ArithmeticError):
    """A multiplication operator is singular or too ill-conditioned to invert."""


class NotEventualIdentity(FmkError):
    """The candidate field fails the eventual-identity gate."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"eventual-identity defect {residual:.3e} exceeds gate {tol:.1e}")
        self.residual = residual
        self.tol = tol


class NotLegendre(FmkError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"Legendre defect {residual:.3e} exceeds {tol:.1e}")
        self.residual = residual
        self.tol = tol


class NotIsomorphism(FmkError):
    """The bundle map X -> A_X(u) is not invertible at some point."""


class SamplingError(FmkError):
    """Rejection sampling could not produce enough admissible points."""


class ModelError(FmkError):
    """A model description is malformed or fails a validation gate."""

    def __init__(self, message: str, gate: str | None = None, residual: float | None = None):
        super().__init__(message)
        self.gate = gate
        self.residual = residual
