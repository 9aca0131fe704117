"""Formation graph, artificial potentials and admissibility checks.

Agents are indexed from 0. Every edge ``(i, j)`` with ``i < j`` carries a
separation distance ``d`` and a gain ``sigma`` and defines the barrier

    V_ij(g_i, g_j) = sigma / (2 * (||psi(g_j) g_i||_F^2 - (d^2 + 3)))

whose denominator equals ``|p_i - p_j|^2 - d^2``.

Two coupling conventions decide which agents feel an edge:

``"staged"``
    The last agent ignores every potential and moves as a free agent; the
    remaining agents feel all their incident edges, with the last agent acting
    as a moving obstacle. This is the structure the staged boundary-value solve
    relies on.
``"reciprocal"``
    Each edge acts on both of its endpoints. The dynamics are then the
    Hamiltonian vector field of ``sum(kinetic) - sum(V)`` and conserve it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SingularityError
from .se2 import GroupElement, compose

SINGULAR_TOL = 1e-12
COUPLINGS = ("staged", "reciprocal")


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    d: float
    sigma: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def d_tilde(self) -> float:
        return self.d * self.d + 3.0


@dataclass(frozen=True, eq=False)
class FormationSpec:
    agent_count: int
    edges: tuple[Edge, ...] = ()
    safety_radius: float = 0.1
    horizon: float = 1.0
    steps: int = 20
    weights: np.ndarray | None = None
    coupling: str = "staged"
    _edge_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = int(self.agent_count)
        if r < 1:
            raise ValueError(f"agent_count must be >= 1, got {self.agent_count}")
        edges = tuple(self.edges)
        seen = set()
        for e in edges:
            if not (0 <= e.i < e.j < r):
                raise ValueError(f"edge ({e.i}, {e.j}) must satisfy 0 <= i < j < {r}")
            if e.key in seen:
                raise ValueError(f"duplicate edge ({e.i}, {e.j})")
            seen.add(e.key)
            if not e.d > 0:
                raise ValueError(f"edge ({e.i}, {e.j}): separation d must be > 0")
            if not e.sigma >= 0:
                raise ValueError(f"edge ({e.i}, {e.j}): sigma must be >= 0")
        if not self.safety_radius > 0:
            raise ValueError("safety_radius must be > 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if int(self.steps) < 2:
            raise ValueError("steps must be >= 2")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        w = np.ones((r, 2)) if self.weights is None else np.array(self.weights, dtype=float).reshape(r, 2)
        if np.any(w <= 0):
            raise ValueError("cost weights must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "agent_count", r)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_edge_index", {e.key: e for e in edges})

    @property
    def step_size(self) -> float:
        return self.horizon / self.steps

    def edge(self, i: int, j: int) -> Edge:
        return self._edge_index[(min(i, j), max(i, j))]

    def with_(self, **changes) -> FormationSpec:
        kw = dict(
            agent_count=self.agent_count,
            edges=self.edges,
            safety_radius=self.safety_radius,
            horizon=self.horizon,
            steps=self.steps,
            weights=self.weights,
            coupling=self.coupling,
        )
        kw.update(changes)
        return FormationSpec(**kw)

    def scaled_sigma(self, factor: float) -> FormationSpec:
        return self.with_(edges=tuple(Edge(e.i, e.j, e.d, e.sigma * factor) for e in self.edges))

    def feels(self, agent: int, edge: Edge) -> bool:
        """Whether ``agent`` receives the gradient of ``edge`` in its equations."""
        if agent not in edge.key:
            return False
        return self.coupling == "reciprocal" or agent != self.agent_count - 1

    def is_free(self, agent: int) -> bool:
        return not any(self.feels(agent, e) and e.sigma != 0 for e in self.edges)


# ---------------------------------------------------------------------------
# per-edge operations on group elements
# ---------------------------------------------------------------------------

def psi(g: GroupElement) -> GroupElement:
    return GroupElement(np.eye(2), -g.pos)


def _relative(g_i: GroupElement, g_j: GroupElement) -> np.ndarray:
    return compose(psi(g_j), g_i).matrix


def constraint_residual(g_i: GroupElement, g_j: GroupElement, edge: Edge) -> float:
    """||psi(g_j) g_i||_F^2 - (d^2 + 3)."""
    h = _relative(g_i, g_j)
    return float(np.sum(h * h) - edge.d_tilde)


def planar_residual(g_i: GroupElement, g_j: GroupElement, edge: Edge) -> float:
    diff = g_i.pos - g_j.pos
    return float(diff @ diff - edge.d * edge.d)


def _check(den: float, edge: Edge) -> None:
    if den <= SINGULAR_TOL:
        raise SingularityError(
            f"agents {edge.i} and {edge.j} are within separation d={edge.d} (residual {den:.3e})",
            edge=edge.key,
        )


def potential_value(g_i: GroupElement, g_j: GroupElement, edge: Edge) -> float:
    den = constraint_residual(g_i, g_j, edge)
    _check(den, edge)
    return edge.sigma / (2.0 * den)


def potential_grad(g_i: GroupElement, g_j: GroupElement, edge: Edge, slot: str) -> np.ndarray:
    """Left-trivialized gradient of V_ij with respect to ``g_i`` or ``g_j``.

    Uses rows of ``G = H^T H`` with ``H = psi(g_other) g_slot``: entries (3,1)
    and (3,2) of ``G`` are the body-frame components of the offset to the other
    agent. The e1 component vanishes because V ignores headings.
    """
    if slot not in ("i", "j"):
        raise ValueError(f"slot must be 'i' or 'j', got {slot!r}")
    den = constraint_residual(g_i, g_j, edge)
    _check(den, edge)
    mine, other = (g_i, g_j) if slot == "i" else (g_j, g_i)
    h = _relative(mine, other)
    gram = h.T @ h
    scale = -edge.sigma / (den * den)
    return np.array([0.0, scale * gram[2, 0], scale * gram[2, 1]])


def admissible(gs: Sequence[GroupElement], safety_radius: float) -> bool:
    """True iff every pair of agents is strictly farther apart than ``safety_radius``."""
    for a in range(len(gs)):
        for b in range(a + 1, len(gs)):
            if not np.linalg.norm(gs[a].pos - gs[b].pos) > safety_radius:
                return False
    return True


def cost_gradient(u, weights) -> np.ndarray:
    """dC/du for C(u) = 1/2 (w1 u1^2 + w2 u2^2), as a coalgebra vector."""
    u = np.asarray(u, dtype=float)
    return np.array([weights[0] * u[0], weights[1] * u[1], 0.0])


def cost_value(u, weights) -> float:
    u = np.asarray(u, dtype=float)
    return 0.5 * (weights[0] * u[0] ** 2 + weights[1] * u[1] ** 2)


# ---------------------------------------------------------------------------
# vectorized helpers over the whole formation (rot: (r,2,2), pos: (r,2))
# ---------------------------------------------------------------------------

def edge_denominators(pos: np.ndarray, spec: FormationSpec) -> np.ndarray:
    out = np.empty(len(spec.edges))
    for k, e in enumerate(spec.edges):
        diff = pos[e.i] - pos[e.j]
        out[k] = diff @ diff - e.d * e.d
    return out


def total_potential(pos: np.ndarray, spec: FormationSpec, step: int | None = None) -> float:
    total = 0.0
    for e in spec.edges:
        diff = pos[e.i] - pos[e.j]
        den = diff @ diff - e.d * e.d
        if den <= SINGULAR_TOL:
            raise SingularityError(
                f"agents {e.i} and {e.j} are within separation d={e.d}"
                + ("" if step is None else f" at step {step}"),
                edge=e.key,
                step=step,
            )
        total += e.sigma / (2.0 * den)
    return total


def agent_forces(rot: np.ndarray, pos: np.ndarray, spec: FormationSpec, step: int | None = None) -> np.ndarray:
    """Summed left-trivialized potential gradients acting on each agent, shape (r, 3).

    Summation is in edge order, so results do not depend on evaluation order.
    """
    out = np.zeros((spec.agent_count, 3))
    for e in spec.edges:
        if e.sigma == 0.0:
            continue
        diff = pos[e.i] - pos[e.j]
        den = diff @ diff - e.d * e.d
        if den <= SINGULAR_TOL:
            raise SingularityError(
                f"agents {e.i} and {e.j} are within separation d={e.d}"
                + ("" if step is None else f" at step {step}"),
                edge=e.key,
                step=step,
            )
        world = (-e.sigma / (den * den)) * diff
        if spec.feels(e.i, e):
            out[e.i, 1:] += rot[e.i].T @ world
        if spec.feels(e.j, e):
            out[e.j, 1:] -= rot[e.j].T @ world
    return out


def min_separation(pos: np.ndarray) -> float:
    r = len(pos)
    best = np.inf
    for a in range(r):
        for b in range(a + 1, r):
            best = min(best, float(np.linalg.norm(pos[a] - pos[b])))
    return best
