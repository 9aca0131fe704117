"""Damped Newton iteration with a central-difference Jacobian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NoConvergence, SingularityError


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    norm: float


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-7) -> np.ndarray:
    """Central differences, one column per unknown in index order."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        cols.append((fun(xp) - fun(xm)) / (2.0 * step))
    return np.column_stack(cols)


def residual_norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def damped_newton(
    fun: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = 1e-10,
    max_iter: int = 50,
    fd_step: float = 1e-7,
    max_halvings: int = 30,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    least_squares: bool = False,
) -> NewtonResult:
    """Solve ``fun(x) = 0`` (max-norm below ``tol``).

    Steps are halved until the residual norm decreases; trial points raising
    :class:`SingularityError` count as rejected. ``least_squares`` switches the
    linear solve to Gauss-Newton for overdetermined systems, which also stops
    once the Gauss-Newton step falls below ``tol``.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    norm = residual_norm(r)
    # overdetermined systems decrease the sum of squares, not the max-norm
    merit = (lambda v: float(v @ v)) if least_squares else residual_norm
    m = merit(r)
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise NoConvergence("Newton iteration did not converge", it, norm)
        it += 1
        J = jac(x) if jac is not None else fd_jacobian(fun, x, fd_step)
        if least_squares or J.shape[0] != J.shape[1]:
            dx = -np.linalg.lstsq(J, r, rcond=None)[0]
        else:
            try:
                dx = -np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(J, r, rcond=None)[0]
        if least_squares and np.max(np.abs(dx)) < tol:
            break
        t = 1.0
        last_error: Exception | None = None
        for _ in range(max_halvings + 1):
            trial = x + t * dx
            try:
                r_trial = fun(trial)
            except SingularityError as exc:
                last_error = exc
                t *= 0.5
                continue
            m_trial = merit(r_trial)
            if np.isfinite(m_trial) and (m_trial < m or residual_norm(r_trial) < tol):
                break
            last_error = None
            t *= 0.5
        else:
            if isinstance(last_error, SingularityError):
                raise last_error
            if least_squares and np.max(np.abs(dx)) < np.sqrt(tol):
                # Gauss-Newton on an inconsistent system stalls at its minimum
                break
            raise NoConvergence("line search failed to reduce the residual", it, norm)
        x, r, m = trial, r_trial, m_trial
        norm = residual_norm(r)
    return NewtonResult(x, it, norm)
