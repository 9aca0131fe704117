"""Exception types raised by the solver stack."""

from __future__ import annotations


class LieFormationError(Exception):
    """Base class for all package errors."""


class DomainError(LieFormationError, ValueError):
    """A group element lies outside the chart of the Cayley retraction."""


class ChartError(DomainError):
    """An endpoint constraint reached the Cayley chart boundary during a solve."""


class SingularityError(LieFormationError, ArithmeticError):
    """Two agents reached (or crossed) the pole of their artificial potential.

    ``edge`` is the offending ``(i, j)`` pair and ``step`` the discrete step
    index when known.
    """

    def __init__(self, message: str, edge: tuple[int, int] | None = None, step: int | None = None):
        super().__init__(message)
        self.edge = edge
        self.step = step


class NoConvergence(LieFormationError, RuntimeError):
    def __init__(self, message: str, iterations: int, final_norm: float):
        super().__init__(f"{message} (iterations={iterations}, final_norm={final_norm:.3e})")
        self.iterations = iterations
        self.final_norm = final_norm
