"""Exception types shared across the package."""

from __future__ import annotations


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """A documented precondition of an operation was violated."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular system, root finder stalled, NaN)."""


class NonConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    The residual history is attached so callers can inspect how far it got.
    """

    def __init__(self, message: str, residual: float, trace=None):
        super().__init__(message)
        self.residual = residual
        self.trace = list(trace) if trace is not None else []


class ConfigError(ValueError):
    """Invalid solver, model or experiment configuration."""


class CertificationError(RuntimeError):
    """A layer failed its algebraic certificate."""
