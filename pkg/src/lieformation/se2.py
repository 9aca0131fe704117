"""Exact SE(2) / se(2) arithmetic.

Coordinates
-----------
Algebra elements are 3-vectors ``(a, b1, b2)`` in the basis

    e1 = [[0,-1,0],[1,0,0],[0,0,0]]   (rotation rate)
    e2 = [[0, 0,1],[0,0,0],[0,0,0]]   (surge)
    e3 = [[0, 0,0],[0,0,1],[0,0,0]]   (sway)

so that ``hat((a, b1, b2)) = a*e1 + b1*e2 + b2*e3``. Controls of a unicycle
live in ``span{e1, e2}`` and always have ``b2 == 0``.

Coalgebra elements are 3-vectors ``(m1, m2, m3)`` in the dual basis of the
trace pairing ``<alpha, xi> = tr(alpha @ xi)``. With that dual basis the pairing
reduces to the Euclidean dot product of coordinates, and every dual map below
is simply the transpose of the corresponding algebra map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

ORTHO_TOL = 1e-9
CHART_TOL = 1e-9
FD_STEP = 1e-6

E1 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
E2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
E3 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
ALGEBRA_BASIS = (E1, E2, E3)

# dual basis under tr(alpha @ xi)
DUAL_E1 = np.array([[0.0, 0.5, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
DUAL_E2 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
DUAL_E3 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
DUAL_BASIS = (DUAL_E1, DUAL_E2, DUAL_E3)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class GroupElement:
    """An element of SE(2) stored as a rotation block and a translation."""

    rot: np.ndarray
    pos: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rot, dtype=float).reshape(2, 2)
        pos = np.array(self.pos, dtype=float).reshape(2)
        rot.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "pos", pos)

    @classmethod
    def identity(cls) -> GroupElement:
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_pose(cls, x: float, y: float, theta: float) -> GroupElement:
        return cls(rotation(theta), np.array([x, y]))

    @classmethod
    def from_matrix(cls, m) -> GroupElement:
        m = np.asarray(m, dtype=float)
        return cls(m[:2, :2], m[:2, 2])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(3)
        m[:2, :2] = self.rot
        m[:2, 2] = self.pos
        return m

    @property
    def x(self) -> float:
        return float(self.pos[0])

    @property
    def y(self) -> float:
        return float(self.pos[1])

    @property
    def theta(self) -> float:
        return float(np.arctan2(self.rot[1, 0], self.rot[0, 0]))

    def pose(self) -> tuple[float, float, float]:
        return self.x, self.y, self.theta

    def orthonormality_defect(self) -> float:
        return float(np.linalg.norm(self.rot.T @ self.rot - np.eye(2)))

    def orthonormalized(self) -> GroupElement:
        """Project the rotation block back onto SO(2) when it has drifted."""
        if self.orthonormality_defect() <= ORTHO_TOL:
            return self
        return GroupElement(_project_rotation(self.rot), self.pos)

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)

    def __repr__(self) -> str:
        return f"GroupElement(x={self.x:.6g}, y={self.y:.6g}, theta={self.theta:.6g})"


def _project_rotation(rot: np.ndarray) -> np.ndarray:
    # closest rotation to a 2x2 matrix (polar factor)
    return rotation(np.arctan2(rot[1, 0] - rot[0, 1], rot[0, 0] + rot[1, 1]))


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(g.rot @ h.rot, g.rot @ h.pos + g.pos)


def inverse(g: GroupElement) -> GroupElement:
    rt = g.rot.T
    return GroupElement(rt, -rt @ g.pos)


def group_distance(g: GroupElement, h: GroupElement) -> float:
    """Frobenius distance of the homogeneous matrices."""
    return float(np.linalg.norm(g.matrix - h.matrix))


# ---------------------------------------------------------------------------
# algebra and coalgebra
# ---------------------------------------------------------------------------

def algebra(a: float = 0.0, b1: float = 0.0, b2: float = 0.0) -> np.ndarray:
    return np.array([a, b1, b2], dtype=float)


def control(u1: float, u2: float) -> np.ndarray:
    """Algebra vector of a unicycle control (turn rate u1, forward speed u2)."""
    return np.array([u1, u2, 0.0])


def hat(xi) -> np.ndarray:
    a, b1, b2 = np.asarray(xi, dtype=float)
    return np.array([[0.0, -a, b1], [a, 0.0, b2], [0.0, 0.0, 0.0]])


def unhat(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.array([m[1, 0], m[0, 2], m[1, 2]])


def dual_hat(mu) -> np.ndarray:
    """Matrix form of a coalgebra vector in the trace-pairing dual basis."""
    mu = np.asarray(mu, dtype=float)
    return mu[0] * DUAL_E1 + mu[1] * DUAL_E2 + mu[2] * DUAL_E3


def pairing(mu, xi) -> float:
    return float(np.dot(mu, xi))


def trace_pairing(mu, xi) -> float:
    """Reference pairing tr(dual_hat(mu) @ hat(xi)); equal to :func:`pairing`."""
    return float(np.trace(dual_hat(mu) @ hat(xi)))


def ad(xi, eta) -> np.ndarray:
    """Lie bracket [xi, eta] in coordinates."""
    x1, x2, x3 = xi
    y1, y2, y3 = eta
    return np.array([0.0, x3 * y1 - x1 * y3, x1 * y2 - x2 * y1])


def ad_matrix(xi) -> np.ndarray:
    x1, x2, x3 = xi
    return np.array([[0.0, 0.0, 0.0], [x3, 0.0, -x1], [-x2, x1, 0.0]])


def coad(xi, mu) -> np.ndarray:
    """ad*_xi mu, defined by <ad*_xi mu, eta> = <mu, [xi, eta]>."""
    x1, x2, x3 = xi
    _, m2, m3 = mu
    return np.array([x3 * m2 - x2 * m3, x1 * m3, -x1 * m2])


def Ad_matrix(g: GroupElement) -> np.ndarray:
    m = np.zeros((3, 3))
    m[0, 0] = 1.0
    m[1:, 0] = (g.pos[1], -g.pos[0])
    m[1:, 1:] = g.rot
    return m


def Ad(g: GroupElement, xi) -> np.ndarray:
    return Ad_matrix(g) @ np.asarray(xi, dtype=float)


def coAd(g: GroupElement, mu) -> np.ndarray:
    return Ad_matrix(g).T @ np.asarray(mu, dtype=float)


# ---------------------------------------------------------------------------
# Cayley retraction
# ---------------------------------------------------------------------------

def cayley(omega) -> GroupElement:
    a, b1, b2 = np.asarray(omega, dtype=float)
    k = 1.0 / (1.0 + 0.25 * a * a)
    c = 1.0 - 0.25 * a * a
    rot = k * np.array([[c, -a], [a, c]])
    pos = k * np.array([b1 - 0.5 * a * b2, b2 + 0.5 * a * b1])
    return GroupElement(rot, pos)


def cayley_matrix_reference(omega) -> np.ndarray:
    """(I - w/2)^-1 (I + w/2) evaluated with dense linear algebra."""
    w = hat(omega)
    eye = np.eye(3)
    return np.linalg.solve(eye - 0.5 * w, eye + 0.5 * w)


def cayley_inv(g: GroupElement) -> np.ndarray:
    """Inverse of :func:`cayley`; raises DomainError at rotation angle pi."""
    theta = g.theta
    if np.pi - abs(theta) < CHART_TOL:
        raise DomainError(f"rotation angle {theta!r} is on the Cayley chart boundary")
    a = 2.0 * np.tan(0.5 * theta)
    v = g.pos
    return np.array([a, v[0] + 0.5 * a * v[1], v[1] - 0.5 * a * v[0]])


def dcay_inv_matrix(omega) -> np.ndarray:
    """Matrix of the inverse right-trivialized Cayley tangent.

    dcay^-1_w(eta) = (I - w/2) eta (I + w/2). Row three carries ``b/2 + a*b2/4``
    in its first column; the frequently quoted ``b/2 + a*b1/4`` does not
    satisfy the defining relation (see tests/test_se2.py).
    """
    a, b1, b2 = np.asarray(omega, dtype=float)
    return np.array(
        [
            [1.0 + 0.25 * a * a, 0.0, 0.0],
            [-0.5 * b2 + 0.25 * a * b1, 1.0, 0.5 * a],
            [0.5 * b1 + 0.25 * a * b2, -0.5 * a, 1.0],
        ]
    )


def dcay_inv(omega, eta) -> np.ndarray:
    return dcay_inv_matrix(omega) @ np.asarray(eta, dtype=float)


def dcay_inv_star(omega, mu) -> np.ndarray:
    return dcay_inv_matrix(omega).T @ np.asarray(mu, dtype=float)


def dcay_fd(omega, eta, step: float = FD_STEP) -> np.ndarray:
    """Central-difference dcay_w(eta) = (d/dt Cay(w + t eta)) Cay(w)^-1, unhatted."""
    omega = np.asarray(omega, dtype=float)
    eta = np.asarray(eta, dtype=float)
    plus = cayley(omega + step * eta).matrix
    minus = cayley(omega - step * eta).matrix
    deriv = (plus - minus) / (2.0 * step)
    return unhat(deriv @ inverse(cayley(omega)).matrix)


def dcay_inv_matrix_fd(omega, step: float = FD_STEP) -> np.ndarray:
    """Oracle for :func:`dcay_inv_matrix` built from the defining relation."""
    dcay = np.column_stack([dcay_fd(omega, e, step) for e in np.eye(3)])
    return np.linalg.inv(dcay)


# ---------------------------------------------------------------------------
# left-trivialized gradients
# ---------------------------------------------------------------------------

ScalarField = Callable[[GroupElement], float]

_ANALYTIC_GRADIENTS: dict[ScalarField, Callable[[GroupElement], np.ndarray]] = {}


def register_gradient(f: ScalarField, grad: Callable[[GroupElement], np.ndarray]) -> None:
    _ANALYTIC_GRADIENTS[f] = grad


def left_trivialized_gradient_fd(f: ScalarField, g: GroupElement, step: float = FD_STEP) -> np.ndarray:
    out = np.empty(3)
    for k, e in enumerate(np.eye(3)):
        fp = f(compose(g, cayley(step * e)))
        fm = f(compose(g, cayley(-step * e)))
        out[k] = (fp - fm) / (2.0 * step)
    return out


def left_trivialized_gradient(f: ScalarField, g: GroupElement, method: str = "auto") -> np.ndarray:
    """Component k is d/de f(g * Cay(e * e_k)) at e = 0.

    ``method`` is ``"fd"`` (central differences), ``"analytic"`` (registered
    formula, KeyError if none) or ``"auto"`` (analytic when registered). A
    callable may also carry its own formula as a ``left_gradient`` attribute.
    """
    if method not in ("auto", "fd", "analytic"):
        raise ValueError(f"unknown method {method!r}")
    if method != "fd":
        grad = getattr(f, "left_gradient", None) or _ANALYTIC_GRADIENTS.get(f)
        if grad is not None:
            return np.asarray(grad(g), dtype=float)
        if method == "analytic":
            raise KeyError(f"no analytic gradient registered for {f!r}")
    return left_trivialized_gradient_fd(f, g)
