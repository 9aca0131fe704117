"""Continuous reduced necessary conditions and their reference integrator.

Both forms share one convention. With ``mu_i = dC_i/du_i + lambda_i`` and
``F_i`` the summed left-trivialized potential gradients acting on agent ``i``,

    d/dt mu_i = ad*_{u_i} mu_i + F_i,      d/dt g_i = g_i u_i.

This is the stationarity condition of the reduced action ``int C + V``
(tests/test_continuous.py checks it against a finite-difference action oracle
through the discrete scheme). The Euler-Poincare form splits it over
``r = span{e1, e2}`` (controls) and ``s = span{e3}`` (the multiplier):

    w_k du^k/dt = [ad*_u lambda + F]_k   (k = 1, 2)
    d lambda3/dt = [ad*_u dC/du + F]_3

The Lie-Poisson form evolves ``mu`` directly with ``u* = (mu1/w1, mu2/w2, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .formation import FormationSpec, agent_forces, total_potential
from .se2 import GroupElement

Derivative = tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class AgentStateEP:
    g: GroupElement
    u: np.ndarray  # (u1, u2, 0)
    lambda3: float


@dataclass(frozen=True)
class AgentStateLP:
    g: GroupElement
    mu: np.ndarray


@dataclass(frozen=True, eq=False)
class SystemState:
    """State of all agents.

    ``z`` holds ``(u1, u2, lambda3)`` per agent in the ``"ep"`` form and
    ``(mu1, mu2, mu3)`` in the ``"lp"`` form.
    """

    rot: np.ndarray  # (r, 2, 2)
    pos: np.ndarray  # (r, 2)
    z: np.ndarray  # (r, 3)
    form: str = "lp"
    time: float = 0.0

    def __post_init__(self):
        if self.form not in ("ep", "lp"):
            raise ValueError(f"form must be 'ep' or 'lp', got {self.form!r}")
        rot = np.array(self.rot, dtype=float).reshape(-1, 2, 2)
        r = rot.shape[0]
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "pos", np.array(self.pos, dtype=float).reshape(r, 2))
        object.__setattr__(self, "z", np.array(self.z, dtype=float).reshape(r, 3))

    @classmethod
    def from_agents(cls, agents: Sequence[AgentStateEP | AgentStateLP], time: float = 0.0) -> SystemState:
        if all(isinstance(a, AgentStateLP) for a in agents):
            z = [a.mu for a in agents]
            form = "lp"
        elif all(isinstance(a, AgentStateEP) for a in agents):
            z = [(a.u[0], a.u[1], a.lambda3) for a in agents]
            form = "ep"
        else:
            raise TypeError("agents must all be AgentStateEP or all AgentStateLP")
        return cls(
            np.array([a.g.rot for a in agents]),
            np.array([a.g.pos for a in agents]),
            np.array(z, dtype=float),
            form,
            time,
        )

    @property
    def agent_count(self) -> int:
        return self.rot.shape[0]

    def group(self, i: int) -> GroupElement:
        return GroupElement(self.rot[i], self.pos[i])

    @property
    def groups(self) -> list[GroupElement]:
        return [self.group(i) for i in range(self.agent_count)]

    @property
    def agents(self) -> list[AgentStateEP | AgentStateLP]:
        if self.form == "lp":
            return [AgentStateLP(self.group(i), self.z[i].copy()) for i in range(self.agent_count)]
        return [
            AgentStateEP(self.group(i), np.array([self.z[i, 0], self.z[i, 1], 0.0]), float(self.z[i, 2]))
            for i in range(self.agent_count)
        ]

    def replace(self, **kw) -> SystemState:
        args = dict(rot=self.rot, pos=self.pos, z=self.z, form=self.form, time=self.time)
        args.update(kw)
        return SystemState(**args)


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def legendre(ep: AgentStateEP, weights) -> AgentStateLP:
    w = np.asarray(weights, dtype=float)
    return AgentStateLP(ep.g, np.array([w[0] * ep.u[0], w[1] * ep.u[1], ep.lambda3]))


def legendre_inv(lp: AgentStateLP, weights) -> AgentStateEP:
    w = np.asarray(weights, dtype=float)
    return AgentStateEP(lp.g, np.array([lp.mu[0] / w[0], lp.mu[1] / w[1], 0.0]), float(lp.mu[2]))


def to_lp(state: SystemState, spec: FormationSpec) -> SystemState:
    if state.form == "lp":
        return state
    z = state.z.copy()
    z[:, :2] *= spec.weights
    return state.replace(z=z, form="lp")


def to_ep(state: SystemState, spec: FormationSpec) -> SystemState:
    if state.form == "ep":
        return state
    z = state.z.copy()
    z[:, :2] /= spec.weights
    return state.replace(z=z, form="ep")


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

def _coad_batch(u: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # rows of ad*_u mu for controls with u3 = 0
    out = np.empty_like(mu)
    out[:, 0] = -u[:, 1] * mu[:, 2]
    out[:, 1] = u[:, 0] * mu[:, 2]
    out[:, 2] = -u[:, 0] * mu[:, 1]
    return out


def _kinematics(rot: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # dR/dt = R * u1 * [[0,-1],[1,0]],  dp/dt = R (u2, 0)
    drot = np.empty_like(rot)
    drot[:, :, 0] = rot[:, :, 1] * u[:, 0:1]
    drot[:, :, 1] = -rot[:, :, 0] * u[:, 0:1]
    dpos = rot[:, :, 0] * u[:, 1:2]
    return drot, dpos


def lp_rhs(state: SystemState, spec: FormationSpec) -> Derivative:
    if state.form != "lp":
        raise ValueError("lp_rhs expects a state in 'lp' form")
    mu = state.z
    u = mu[:, :2] / spec.weights
    dmu = _coad_batch(u, mu) + agent_forces(state.rot, state.pos, spec)
    drot, dpos = _kinematics(state.rot, u)
    return drot, dpos, dmu


def ep_rhs(state: SystemState, spec: FormationSpec) -> Derivative:
    if state.form != "ep":
        raise ValueError("ep_rhs expects a state in 'ep' form")
    u = state.z[:, :2]
    lam = state.z[:, 2]
    force = agent_forces(state.rot, state.pos, spec)
    w = spec.weights
    dz = np.empty_like(state.z)
    # r* part: ad*_u lambda restricted to span{e^1, e^2}
    dz[:, 0] = (-u[:, 1] * lam + force[:, 0]) / w[:, 0]
    dz[:, 1] = (u[:, 0] * lam + force[:, 1]) / w[:, 1]
    # s* part: ad*_u (dC/du) restricted to span{e^3}
    dz[:, 2] = -u[:, 0] * (w[:, 1] * u[:, 1]) + force[:, 2]
    drot, dpos = _kinematics(state.rot, u)
    return drot, dpos, dz


def rhs_for(state: SystemState) -> Callable[[SystemState, FormationSpec], Derivative]:
    return lp_rhs if state.form == "lp" else ep_rhs


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _reorthonormalize(rot: np.ndarray) -> np.ndarray:
    gram = np.einsum("kji,kjl->kil", rot, rot) - np.eye(2)
    defect = np.sqrt(np.sum(gram * gram, axis=(1, 2)))
    bad = defect > 1e-9
    if not np.any(bad):
        return rot
    rot = rot.copy()
    ang = np.arctan2(rot[bad, 1, 0] - rot[bad, 0, 1], rot[bad, 0, 0] + rot[bad, 1, 1])
    c, s = np.cos(ang), np.sin(ang)
    rot[bad] = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    return rot


def _advance(state: SystemState, d: Derivative, dt: float) -> SystemState:
    return SystemState(state.rot + dt * d[0], state.pos + dt * d[1], state.z + dt * d[2], state.form, state.time + dt)


def rk4_step(rhs, state: SystemState, dt: float, spec: FormationSpec) -> SystemState:
    """One classical RK4 step; rotation blocks are re-projected onto SO(2) afterwards."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = rhs(state, spec)
    k2 = rhs(_advance(state, k1, 0.5 * dt), spec)
    k3 = rhs(_advance(state, k2, 0.5 * dt), spec)
    k4 = rhs(_advance(state, k3, dt), spec)
    parts = [
        getattr(state, name) + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + e)
        for name, a, b, c, e in zip(("rot", "pos", "z"), k1, k2, k3, k4)
    ]
    return SystemState(_reorthonormalize(parts[0]), parts[1], parts[2], state.form, state.time + dt)


def integrate(
    state: SystemState,
    spec: FormationSpec,
    dt: float,
    t_final: float,
    rhs=None,
    record_every: int | None = None,
) -> tuple[SystemState, list[SystemState]]:
    """Fixed-step RK4 from ``state.time`` to ``t_final``.

    The step count is ``round((t_final - t0) / dt)``, and the final step is
    stretched or shrunk so the horizon is hit exactly.
    """
    rhs = rhs or rhs_for(state)
    span = t_final - state.time
    n = max(1, int(round(span / dt)))
    h = span / n
    history = [state] if record_every else []
    for k in range(n):
        state = rk4_step(rhs, state, h, spec)
        if record_every and (k + 1) % record_every == 0:
            history.append(state)
    return state, history


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def hamiltonian(state: SystemState, spec: FormationSpec) -> float:
    """h(g, mu) = sum_i (mu1^2/(2 w1) + mu2^2/(2 w2)) - sum_edges V."""
    mu = to_lp(state, spec).z
    kinetic = 0.5 * np.sum(mu[:, :2] ** 2 / spec.weights)
    return float(kinetic - total_potential(state.pos, spec))


def casimirs(state: SystemState, spec: FormationSpec) -> np.ndarray:
    mu = to_lp(state, spec).z
    return mu[:, 1] ** 2 + mu[:, 2] ** 2


def diagnostics(state: SystemState, spec: FormationSpec) -> dict:
    return {"hamiltonian": hamiltonian(state, spec), "casimirs": casimirs(state, spec)}


def free_flow(g0: GroupElement, mu0, weights, t_final: float, dt: float = 1e-3) -> list[SystemState]:
    """Trajectory of a single agent without potentials (used for initial guesses)."""
    spec = FormationSpec(1, weights=np.asarray(weights, dtype=float).reshape(1, 2))
    state = SystemState(g0.rot[None], g0.pos[None], np.asarray(mu0, dtype=float)[None], "lp")
    _, hist = integrate(state, spec, dt, t_final, record_every=1)
    return hist

