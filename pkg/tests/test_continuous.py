import numpy as np
import pytest

from conftest import spread_state, triangle_spec
from lieformation.continuous import (
    AgentStateEP,
    AgentStateLP,
    SystemState,
    casimirs,
    diagnostics,
    ep_rhs,
    free_flow,
    hamiltonian,
    integrate,
    legendre,
    legendre_inv,
    lp_rhs,
    rk4_step,
    to_ep,
    to_lp,
)
from lieformation.discrete import step_residual
from lieformation.formation import Edge, FormationSpec, potential_grad, potential_value
from lieformation.se2 import GroupElement, cayley, cayley_inv, compose, dcay_inv_star, inverse


def test_legendre_roundtrip():
    g = GroupElement.from_pose(1, 2, 0.3)
    ep = AgentStateEP(g, np.array([0.4, -1.2, 0.0]), 0.7)
    lp = legendre(ep, [2.0, 3.0])
    np.testing.assert_allclose(lp.mu, [0.8, -3.6, 0.7])
    back = legendre_inv(lp, [2.0, 3.0])
    np.testing.assert_allclose(back.u, ep.u)
    assert back.lambda3 == pytest.approx(0.7)


def test_state_conversions_and_agents():
    spec = FormationSpec(2, weights=[[2.0, 1.0], [1.0, 4.0]])
    s = SystemState(np.array([np.eye(2)] * 2), [[0, 0], [1, 1]], [[1.0, 2.0, 3.0], [4.0, 8.0, 5.0]], "lp")
    ep = to_ep(s, spec)
    np.testing.assert_allclose(ep.z, [[0.5, 2.0, 3.0], [4.0, 2.0, 5.0]])
    np.testing.assert_allclose(to_lp(ep, spec).z, s.z)
    assert isinstance(ep.agents[0], AgentStateEP) and isinstance(s.agents[1], AgentStateLP)
    again = SystemState.from_agents(ep.agents)
    np.testing.assert_allclose(again.z, ep.z)
    with pytest.raises(ValueError):
        SystemState(s.rot, s.pos, s.z, "hp")
    with pytest.raises(ValueError):
        lp_rhs(ep, spec)
    with pytest.raises(ValueError):
        ep_rhs(s, spec)
    with pytest.raises(TypeError):
        SystemState.from_agents([ep.agents[0], s.agents[1]])


def test_free_equations_with_trace_metric_weights():
    # With cost weights (2, 1) the free EP equations read
    #   du1/dt = -u2 lambda3 / 2,  du2/dt = u1 lambda3,  dlambda3/dt = -u1 u2
    # and the LP ones
    #   dmu1/dt = -mu2 mu3,  dmu2/dt = mu1 mu3 / 2,  dmu3/dt = -mu1 mu2 / 2.
    spec = FormationSpec(1, weights=[[2.0, 1.0]])
    u1, u2, lam = 0.3, -0.7, 1.1
    ep = SystemState(np.eye(2)[None], [[0, 0]], [[u1, u2, lam]], "ep")
    _, _, dz = ep_rhs(ep, spec)
    np.testing.assert_allclose(dz[0], [-u2 * lam / 2, u1 * lam, -u1 * u2])
    m1, m2, m3 = 0.9, 0.4, -0.5
    lp = SystemState(np.eye(2)[None], [[0, 0]], [[m1, m2, m3]], "lp")
    _, _, dm = lp_rhs(lp, spec)
    np.testing.assert_allclose(dm[0], [-m2 * m3, m1 * m3 / 2, -m1 * m2 / 2])


def test_kinematics_is_unicycle():
    spec = FormationSpec(1)
    th = 0.6
    s = SystemState(GroupElement.from_pose(0, 0, th).rot[None], [[0, 0]], [[0.5, 2.0, 0.0]], "lp")
    drot, dpos, _ = lp_rhs(s, spec)
    np.testing.assert_allclose(dpos[0], [2.0 * np.cos(th), 2.0 * np.sin(th)])
    # d theta/dt = u1
    dtheta = drot[0, 1, 0] * np.cos(th) - drot[0, 0, 0] * np.sin(th)
    assert dtheta == pytest.approx(0.5)


def test_free_casimir_conserved():
    spec = FormationSpec(1, weights=[[1.5, 0.8]])
    s0 = SystemState(np.eye(2)[None], [[0, 0]], [[0.7, -0.4, 0.9]], "lp")
    s1, hist = integrate(s0, spec, 1e-3, 3.0, record_every=500)
    assert len(hist) == 7
    assert abs(casimirs(s1, spec)[0] - casimirs(s0, spec)[0]) < 1e-10
    assert abs(hamiltonian(s1, spec) - hamiltonian(s0, spec)) < 1e-10


def test_coupled_hamiltonian_conserved():
    spec = triangle_spec("reciprocal", sigma=0.1)
    rot, pos, mu = spread_state()
    s0 = SystemState(rot, pos, mu, "lp")
    s1, _ = integrate(s0, spec, 1e-3, 1.0)
    assert abs(hamiltonian(s1, spec) - hamiltonian(s0, spec)) < 1e-8
    assert set(diagnostics(s1, spec)) == {"hamiltonian", "casimirs"}


def test_staged_coupling_breaks_energy_but_not_free_casimir():
    spec = triangle_spec("staged", sigma=0.1)
    rot, pos, mu = spread_state()
    s0 = SystemState(rot, pos, mu, "lp")
    s1, _ = integrate(s0, spec, 1e-3, 1.0)
    assert abs(casimirs(s1, spec)[2] - casimirs(s0, spec)[2]) < 1e-10


def test_ep_and_lp_flows_agree():
    spec = triangle_spec("staged", sigma=0.1, weights=[[1.3, 1.7], [1.9, 1.6], [1.1, 1.4]])
    rot, pos, mu = spread_state()
    s0 = SystemState(rot, pos, mu, "lp")
    lp, _ = integrate(s0, spec, 1e-3, 1.0)
    ep, _ = integrate(to_ep(s0, spec), spec, 1e-3, 1.0)
    np.testing.assert_allclose(lp.pos, ep.pos, atol=1e-8)
    np.testing.assert_allclose(to_ep(lp, spec).z, ep.z, atol=1e-8)


def test_rk4_rejects_nonpositive_step():
    spec = FormationSpec(1)
    s = SystemState(np.eye(2)[None], [[0, 0]], [[0, 1, 0]], "lp")
    with pytest.raises(ValueError):
        rk4_step(lp_rhs, s, 0.0, spec)


def test_free_flow_straight_line():
    hist = free_flow(GroupElement.identity(), [0.0, 2.0, 0.0], [1.0, 1.0], 0.5, 1e-2)
    np.testing.assert_allclose(hist[-1].pos[0], [1.0, 0.0], atol=1e-12)


# --- variational oracle -----------------------------------------------------

def test_discrete_residual_is_minus_gradient_of_discrete_action(rng):
    """Sign conventions: the interior residual is -dS/dg^k for S = sum h (C + V)."""
    w = np.array([1.3, 0.7, 2.1])
    h, n, k = 0.1, 6, 3
    edge = Edge(0, 1, 0.5, 0.4)
    obstacle = [GroupElement.from_pose(2.0 + 0.1 * j, 1.0, 0.0) for j in range(n + 1)]
    gs = [GroupElement.identity()]
    for _ in range(n):
        gs.append(compose(gs[-1], cayley(h * rng.normal(size=3))))

    def xi(gs, j):
        return cayley_inv(compose(inverse(gs[j]), gs[j + 1])) / h

    def action(gs):
        return sum(
            h * (0.5 * np.sum(w * xi(gs, j) ** 2) + potential_value(gs[j], obstacle[j], edge)) for j in range(n)
        )

    eps = 1e-6
    grad = np.empty(3)
    for c, e in enumerate(np.eye(3)):
        plus, minus = list(gs), list(gs)
        plus[k] = compose(gs[k], cayley(eps * e))
        minus[k] = compose(gs[k], cayley(-eps * e))
        grad[c] = (action(plus) - action(minus)) / (2 * eps)
    res = (
        dcay_inv_star(h * xi(gs, k), w * xi(gs, k))
        - dcay_inv_star(-h * xi(gs, k - 1), w * xi(gs, k - 1))
        - h * potential_grad(gs[k], obstacle[k], edge, "i")
    )
    np.testing.assert_allclose(grad, -res, rtol=1e-6, atol=1e-8)


def test_continuous_flow_is_limit_of_discrete_conditions():
    """Sampling a continuous extremal makes the discrete residual vanish at rate h."""
    spec = FormationSpec(2, (Edge(0, 1, 0.5, 0.3),), weights=[[1.2, 0.8], [1.0, 1.0]])
    s0 = SystemState(np.array([np.eye(2)] * 2), [[0, 0], [1.2, 0.3]], [[0.4, 0.9, 0.3], [0.1, 1.0, 0.0]], "lp")
    worst = {}
    for h in (4e-3, 2e-3):
        states = [s0]
        for _ in range(3):
            states.append(integrate(states[-1], spec, h / 20, states[-1].time + h)[0])
        # midpoint momenta approximate the step unknowns
        mid = [integrate(states[j], spec, h / 40, states[j].time + h / 2)[0] for j in range(2)]
        x = []
        for j in range(2):
            ep = to_ep(mid[j], spec)
            x.append(ep.z)
        res = step_residual(x[0], x[1], states[1].rot, states[1].pos, spec, h)
        worst[h] = np.max(np.abs(res[0])) / h
    assert worst[2e-3] < 0.6 * worst[4e-3]
    assert worst[2e-3] < 1e-2
