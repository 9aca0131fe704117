"""Discrete Lie-Poisson variational integrator with the Cayley retraction.

Per-step unknowns for agent ``i`` are ``x = (u1, u2, lambda3)``; the control is
``u = (u1, u2, 0)`` and the discrete momentum ``mu = (w1 u1, w2 u2, lambda3)``.
The interior equations are

    g^{k+1} = g^k Cay(h u^k)
    M(h u^k)^T mu^k - M(-h u^{k-1})^T mu^{k-1} - h F(g^k) = 0

with ``F`` the summed left-trivialized potential gradients. Both potential
quadratures, the left-point rule (``order=1``) and the trapezoidal rule
(``order=2``), share these interior equations; they differ in how node
momenta ``p^k`` are read off a discrete state, i.e. in the boundary maps

    p^k = M(-h u^{k-1})^T mu^{k-1} + c h F(g^k)
    M(h u^k)^T mu^k = p^k + (1 - c) h F(g^k)

with ``c = 0`` for order 1 and ``c = 1/2`` for order 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formation import FormationSpec, agent_forces, cost_gradient
from .newton import damped_newton, fd_jacobian, residual_norm
from .se2 import GroupElement, ad, cayley, cayley_inv, compose, inverse


def _check_order(order: int) -> float:
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    return 0.0 if order == 1 else 0.5


# ---------------------------------------------------------------------------
# batched Cayley helpers for controls with u3 = 0
# ---------------------------------------------------------------------------

def momenta(x: np.ndarray, spec: FormationSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    mu = x.copy()
    mu[:, :2] *= spec.weights
    return mu


def controls(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    u = x.copy()
    u[:, 2] = 0.0
    return u


def dcay_inv_star_batch(omega: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Rows M(omega_i)^T mu_i for general algebra vectors omega_i."""
    a, b1, b2 = omega[:, 0], omega[:, 1], omega[:, 2]
    m1, m2, m3 = mu[:, 0], mu[:, 1], mu[:, 2]
    out = np.empty_like(mu)
    out[:, 0] = (
        (1.0 + 0.25 * a * a) * m1
        + (-0.5 * b2 + 0.25 * a * b1) * m2
        + (0.5 * b1 + 0.25 * a * b2) * m3
    )
    out[:, 1] = m2 - 0.5 * a * m3
    out[:, 2] = 0.5 * a * m2 + m3
    return out


def cayley_batch(omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b1, b2 = omega[:, 0], omega[:, 1], omega[:, 2]
    k = 1.0 / (1.0 + 0.25 * a * a)
    c = 1.0 - 0.25 * a * a
    rot = np.empty((len(a), 2, 2))
    rot[:, 0, 0] = k * c
    rot[:, 0, 1] = -k * a
    rot[:, 1, 0] = k * a
    rot[:, 1, 1] = k * c
    pos = np.stack([k * (b1 - 0.5 * a * b2), k * (b2 + 0.5 * a * b1)], axis=-1)
    return rot, pos


def reconstruct_step(rot: np.ndarray, pos: np.ndarray, u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """g^{k+1} = g^k Cay(h u^k) for every agent."""
    crot, cpos = cayley_batch(h * u)
    return np.einsum("kij,kjl->kil", rot, crot), pos + np.einsum("kij,kj->ki", rot, cpos)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepUnknowns:
    u: np.ndarray  # (r, 3) with u[:, 2] == 0
    lambda3: np.ndarray  # (r,)

    @classmethod
    def from_array(cls, x) -> StepUnknowns:
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        return cls(controls(x), x[:, 2].copy())

    def to_array(self) -> np.ndarray:
        return np.column_stack([self.u[:, 0], self.u[:, 1], self.lambda3])


def _as_x(v) -> np.ndarray:
    if isinstance(v, StepUnknowns):
        return v.to_array()
    return np.asarray(v, dtype=float).reshape(-1, 3)


def step_residual(prev, cur, rot_k, pos_k, spec: FormationSpec, h: float, force=None, step=None) -> np.ndarray:
    """Residual of the interior discrete equation at node k, shape (r, 3)."""
    xp, xc = _as_x(prev), _as_x(cur)
    if force is None:
        force = agent_forces(rot_k, pos_k, spec, step=step)
    left = dcay_inv_star_batch(h * controls(xc), momenta(xc, spec))
    right = dcay_inv_star_batch(-h * controls(xp), momenta(xp, spec))
    return left - right - h * force


def step_residual_order2(prev, cur, rot_k, pos_k, spec: FormationSpec, h: float, step=None) -> np.ndarray:
    """Interior residual for the trapezoidal potential quadrature.

    Node k is the right end of segment k-1 and the left end of segment k;
    each trapezoid contributes ``h/2 * F(g^k)`` to it.
    """
    xp, xc = _as_x(prev), _as_x(cur)
    force = agent_forces(rot_k, pos_k, spec, step=step)
    from_previous_segment = 0.5 * h * force
    from_current_segment = 0.5 * h * force
    left = dcay_inv_star_batch(h * controls(xc), momenta(xc, spec))
    right = dcay_inv_star_batch(-h * controls(xp), momenta(xp, spec))
    return left - right - from_previous_segment - from_current_segment


def step_residual_coadjoint(prev, cur, rot_k, pos_k, spec: FormationSpec, h: float) -> np.ndarray:
    """Same residual with M(-w)^T mu rewritten as Ad*_{Cay(w)} M(w)^T mu."""
    from .se2 import coAd, dcay_inv_star

    xp, xc = _as_x(prev), _as_x(cur)
    force = agent_forces(rot_k, pos_k, spec)
    left = dcay_inv_star_batch(h * controls(xc), momenta(xc, spec))
    up, mp = controls(xp), momenta(xp, spec)
    right = np.array([coAd(cayley(h * up[i]), dcay_inv_star(h * up[i], mp[i])) for i in range(len(xp))])
    return left - right - h * force


# ---------------------------------------------------------------------------
# boundary transforms
# ---------------------------------------------------------------------------

def boundary_initial(u0, rot0, pos0, spec: FormationSpec, h: float) -> np.ndarray:
    """mu^0 = dC/du(u(0)) + h F(g^0) per agent."""
    u0 = np.asarray(u0, dtype=float).reshape(spec.agent_count, -1)
    grad = np.array([cost_gradient(u0[i], spec.weights[i]) for i in range(spec.agent_count)])
    return grad + h * agent_forces(rot0, pos0, spec)


def boundary_final(uT, x_last, rotN, posN, spec: FormationSpec, h: float) -> np.ndarray:
    """dC/du(u(T)) - M(-h u^{N-1})^T mu^{N-1} - h F(g^N) per agent."""
    uT = np.asarray(uT, dtype=float).reshape(spec.agent_count, -1)
    grad = np.array([cost_gradient(uT[i], spec.weights[i]) for i in range(spec.agent_count)])
    xl = _as_x(x_last)
    back = dcay_inv_star_batch(-h * controls(xl), momenta(xl, spec))
    return grad - back - h * agent_forces(rotN, posN, spec)


def node_momentum(x_prev, rot_k, pos_k, spec: FormationSpec, h: float, order: int = 1) -> np.ndarray:
    """Continuous-time momentum estimate p^k at a node (right discrete Legendre map)."""
    c = _check_order(order)
    xp = _as_x(x_prev)
    p = dcay_inv_star_batch(-h * controls(xp), momenta(xp, spec))
    if c:
        p = p + c * h * agent_forces(rot_k, pos_k, spec)
    return p


def _solve_left_legendre(target: np.ndarray, spec: FormationSpec, h: float, guess=None, tol: float = 1e-13, max_iter: int = 50):
    def fun(v):
        x = v.reshape(-1, 3)
        return (dcay_inv_star_batch(h * controls(x), momenta(x, spec)) - target).ravel()

    x0 = momenta_to_x(target, spec) if guess is None else _as_x(guess)
    return damped_newton(fun, x0.ravel(), tol=tol, max_iter=max_iter)


def momenta_to_x(mu, spec: FormationSpec) -> np.ndarray:
    x = np.array(mu, dtype=float).reshape(-1, 3)
    x[:, :2] /= spec.weights
    return x


def start_from_momentum(p, rot_k, pos_k, spec: FormationSpec, h: float, order: int = 1, guess=None, tol: float = 1e-13) -> np.ndarray:
    """Solve M(h u^k)^T mu^k = p^k + (1 - c) h F(g^k) for the step unknowns (left Legendre map)."""
    c = _check_order(order)
    target = np.asarray(p, dtype=float).reshape(-1, 3) + (1.0 - c) * h * agent_forces(rot_k, pos_k, spec)
    return _solve_left_legendre(target, spec, h, guess, tol).x.reshape(-1, 3)


# ---------------------------------------------------------------------------
# step solve and flow map
# ---------------------------------------------------------------------------

def newton_step_solve(prev, rot_k, pos_k, spec: FormationSpec, h: float, guess=None, tol: float = 1e-12, max_iter: int = 50, step=None) -> StepUnknowns:
    """Solve the interior equation at node k for the next step unknowns."""
    xp = _as_x(prev)
    force = agent_forces(rot_k, pos_k, spec, step=step)
    x0 = xp if guess is None else _as_x(guess)

    def fun(v):
        return step_residual(xp, v.reshape(-1, 3), rot_k, pos_k, spec, h, force=force).ravel()

    res = damped_newton(fun, x0.ravel(), tol=tol, max_iter=max_iter)
    newton_step_solve.last_iterations = res.iterations
    return StepUnknowns.from_array(res.x)


newton_step_solve.last_iterations = 0


@dataclass(frozen=True, eq=False)
class DiscreteState:
    """``(g^k, u^{k-1}, lambda^{k-1})`` for every agent; ``x`` stacks the step unknowns."""

    rot: np.ndarray
    pos: np.ndarray
    x: np.ndarray

    def mu(self, spec: FormationSpec) -> np.ndarray:
        return momenta(self.x, spec)

    @property
    def u(self) -> np.ndarray:
        return controls(self.x)


def flow_map(state: DiscreteState, spec: FormationSpec, h: float, tol: float = 1e-13, max_iter: int = 50) -> DiscreteState:
    cur = newton_step_solve(state.x, state.rot, state.pos, spec, h, guess=state.x, tol=tol, max_iter=max_iter)
    x = cur.to_array()
    rot, pos = reconstruct_step(state.rot, state.pos, controls(x), h)
    return DiscreteState(rot, pos, x)


def one_step(rot, pos, p, spec: FormationSpec, h: float, order: int = 1, guess=None, tol: float = 1e-13):
    """Map (g^k, p^k) -> (g^{k+1}, p^{k+1}, x^k) through both discrete Legendre maps."""
    x = start_from_momentum(p, rot, pos, spec, h, order, guess=guess, tol=tol)
    rot1, pos1 = reconstruct_step(rot, pos, controls(x), h)
    return rot1, pos1, node_momentum(x, rot1, pos1, spec, h, order), x


def integrate_discrete(rot0, pos0, p0, spec: FormationSpec, n_steps: int, h: float, order: int = 1, tol: float = 1e-13):
    """Initial-value discrete flow from continuous data ``(g(0), mu(0))``.

    Returns the trajectory and the terminal node momentum.
    """
    rot = np.array(rot0, dtype=float)
    pos = np.array(pos0, dtype=float)
    r = rot.shape[0]
    rots = np.empty((r, n_steps + 1, 2, 2))
    poss = np.empty((r, n_steps + 1, 2))
    xs = np.empty((r, n_steps, 3))
    rots[:, 0], poss[:, 0] = rot, pos
    x = start_from_momentum(p0, rot, pos, spec, h, order, tol=tol)
    for k in range(n_steps):
        if k > 0:
            x = newton_step_solve(x, rot, pos, spec, h, guess=x, tol=tol, step=k).to_array()
        xs[:, k] = x
        rot, pos = reconstruct_step(rot, pos, controls(x), h)
        rots[:, k + 1], poss[:, k + 1] = rot, pos
    traj = DiscreteTrajectory(rots, poss, xs, h, spec)
    return traj, node_momentum(x, rot, pos, spec, h, order)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteTrajectory:
    rot: np.ndarray  # (r, N+1, 2, 2)
    pos: np.ndarray  # (r, N+1, 2)
    x: np.ndarray  # (r, N, 3): u1, u2, lambda3
    h: float
    spec: FormationSpec

    @property
    def agent_count(self) -> int:
        return self.rot.shape[0]

    @property
    def steps(self) -> int:
        return self.x.shape[1]

    @property
    def u(self) -> np.ndarray:
        u = self.x.copy()
        u[..., 2] = 0.0
        return u

    @property
    def mu(self) -> np.ndarray:
        mu = self.x.copy()
        mu[..., :2] *= self.spec.weights[:, None, :]
        return mu

    def g(self, i: int, k: int) -> GroupElement:
        return GroupElement(self.rot[i, k], self.pos[i, k])

    def theta(self) -> np.ndarray:
        return np.arctan2(self.rot[..., 1, 0], self.rot[..., 0, 0])

    def reconstruction_defect(self) -> float:
        worst = 0.0
        for k in range(self.steps):
            rot, pos = reconstruct_step(self.rot[:, k], self.pos[:, k], self.u[:, k], self.h)
            worst = max(worst, float(np.max(np.abs(rot - self.rot[:, k + 1]))), float(np.max(np.abs(pos - self.pos[:, k + 1]))))
        return worst

    def step_residuals(self, order: int = 1) -> np.ndarray:
        """Interior residuals, shape (N-1, r, 3)."""
        fn = step_residual if order == 1 else step_residual_order2
        return np.array(
            [fn(self.x[:, k - 1], self.x[:, k], self.rot[:, k], self.pos[:, k], self.spec, self.h) for k in range(1, self.steps)]
        ).reshape(-1, self.agent_count, 3)

    def max_step_residual(self, order: int = 1) -> float:
        res = self.step_residuals(order)
        return residual_norm(res.ravel())

    def min_separation(self) -> float:
        best = np.inf
        for a in range(self.agent_count):
            for b in range(a + 1, self.agent_count):
                d = np.linalg.norm(self.pos[a] - self.pos[b], axis=-1)
                best = min(best, float(d.min()))
        return best

    def edge_clearance(self) -> float:
        """min over steps and edges of |p_i - p_j| - d_ij."""
        best = np.inf
        for e in self.spec.edges:
            d = np.linalg.norm(self.pos[e.i] - self.pos[e.j], axis=-1)
            best = min(best, float(d.min() - e.d))
        return best

    def scaled(self, s: float) -> DiscreteTrajectory:
        """Time-rescaled trajectory: same configurations, step ``s*h``.

        Controls and momenta are divided by ``s`` and potential gains by
        ``s**2``; the interior residual is then the original one divided by ``s``.
        """
        if not s > 0:
            raise ValueError("scale factor must be positive")
        spec = self.spec.scaled_sigma(1.0 / s**2).with_(horizon=self.spec.horizon * s)
        return DiscreteTrajectory(self.rot, self.pos, self.x / s, self.h * s, spec)


# ---------------------------------------------------------------------------
# symplectic structure
# ---------------------------------------------------------------------------

def symplectic_form(p, tangent1, tangent2) -> float:
    """omega_c = sum_i -<nu1, xi2> + <nu2, xi1> + <p, [xi1, xi2]>.

    Tangents are ``(xi, nu)`` pairs of (r, 3) arrays in left-trivialized
    coordinates at the base point with momenta ``p`` (r, 3).
    """
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    xi1, nu1 = (np.asarray(a, dtype=float).reshape(-1, 3) for a in tangent1)
    xi2, nu2 = (np.asarray(a, dtype=float).reshape(-1, 3) for a in tangent2)
    total = 0.0
    for i in range(p.shape[0]):
        total += -nu1[i] @ xi2[i] + nu2[i] @ xi1[i] + p[i] @ ad(xi1[i], xi2[i])
    return float(total)


def _symplectic_matrix(p: np.ndarray) -> np.ndarray:
    n = p.size * 2
    basis = np.eye(n)
    r = p.shape[0]

    def split(v):
        v = v.reshape(r, 6)
        return v[:, :3], v[:, 3:]

    return np.array([[symplectic_form(p, split(a), split(b)) for b in basis] for a in basis])


def step_map_jacobian(rot, pos, p, spec: FormationSpec, h: float, order: int = 1, eps: float = 1e-5):
    """Central-difference Jacobian of (g, p) -> (g', p') in left-trivialized coordinates.

    Coordinates per agent are ``(xi, nu)``: ``g -> g Cay(xi)``, ``p -> p + nu``.
    """
    r = len(rot)
    rot1, pos1, p1, x_ref = one_step(rot, pos, p, spec, h, order)
    base_inv = [inverse(GroupElement(rot1[i], pos1[i])) for i in range(r)]

    def coords(v):
        v = v.reshape(r, 6)
        rr = np.empty_like(rot)
        pp = np.empty_like(pos)
        for i in range(r):
            gi = compose(GroupElement(rot[i], pos[i]), cayley(v[i, :3]))
            rr[i], pp[i] = gi.rot, gi.pos
        ro, po, pn, _ = one_step(rr, pp, p + v[:, 3:], spec, h, order, guess=x_ref)
        out = np.empty((r, 6))
        for i in range(r):
            out[i, :3] = cayley_inv(compose(base_inv[i], GroupElement(ro[i], po[i])))
            out[i, 3:] = pn[i] - p1[i]
        return out.ravel()

    jac = fd_jacobian(coords, np.zeros(6 * r), eps)
    return jac, p1


def symplectic_blocks(spec: FormationSpec) -> list[list[int]]:
    """Agent groups on which one step is symplectic.

    Under reciprocal coupling the whole formation is one Hamiltonian system.
    Under staged coupling the free agent evolves on its own and acts on the
    others as a time-dependent obstacle, so each group is symplectic separately.
    """
    r = spec.agent_count
    if spec.coupling == "reciprocal":
        return [list(range(r))]
    free = [i for i in range(r) if spec.is_free(i)]
    driven = [i for i in range(r) if i not in free]
    return [b for b in (driven, free) if b]


def symplecticity_defect(rot, pos, p, spec: FormationSpec, h: float, order: int = 1, eps: float = 1e-5) -> float:
    """max |omega(Jv, Jw) - omega(v, w)| over basis tangent pairs of one step."""
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    jac, p1 = step_map_jacobian(rot, pos, p, spec, h, order, eps)
    worst = 0.0
    for block in symplectic_blocks(spec):
        idx = np.concatenate([np.arange(6 * i, 6 * i + 6) for i in block])
        jb = jac[np.ix_(idx, idx)]
        before = _symplectic_matrix(p[block])
        after = jb.T @ _symplectic_matrix(p1[block]) @ jb
        worst = max(worst, float(np.max(np.abs(after - before))))
    return worst


def state_momentum(state: DiscreteState, spec: FormationSpec, h: float, order: int = 1) -> np.ndarray:
    return node_momentum(state.x, state.rot, state.pos, spec, h, order)

