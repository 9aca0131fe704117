import warnings

import numpy as np
import pytest

from conftest import triangle_spec
from lieformation.bvp import (
    AgentBoundary,
    SolverConfig,
    chord_control,
    convergence_study,
    full_residual,
    initial_guess,
    solve,
    stage_one,
    validate_problem,
)
from lieformation.discrete import DiscreteTrajectory
from lieformation.errors import NoConvergence
from lieformation.formation import Edge, FormationSpec
from lieformation.se2 import GroupElement

P = GroupElement.from_pose


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(initial_guess="random")
    with pytest.raises(ValueError):
        SolverConfig(order=3)
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)


def test_chord_control():
    np.testing.assert_allclose(chord_control(P(0, 0, 0), P(2, 0, 0), 1.0), [0.0, 2.0])
    np.testing.assert_allclose(chord_control(P(0, 0, 0), P(0, 0, np.pi), 1.0), [0.0, 0.0])


def test_initial_guesses(straight_boundaries):
    spec = triangle_spec(steps=8)
    zero = initial_guess(straight_boundaries, spec, "zero")
    assert zero.shape == (3, 8, 3) and not zero.any()
    lin = initial_guess(straight_boundaries, spec, "linear-interpolation")
    np.testing.assert_allclose(lin[..., 1], 1.0)
    free = initial_guess(straight_boundaries, spec, "free-flow")
    np.testing.assert_allclose(free[..., 1], 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        initial_guess(straight_boundaries, spec, "bogus")


def test_stage_one_recovers_straight_line_from_perturbed_guess(straight_boundaries, rng):
    spec = triangle_spec(steps=10)
    exact = np.zeros((3, 10, 3))
    exact[..., 1] = 1.0
    for _ in range(3):
        guess = exact + 0.05 * rng.normal(size=exact.shape)
        x, _ = stage_one(spec, straight_boundaries, guess, SolverConfig(tol=1e-12))
        np.testing.assert_allclose(x[2], exact[2], atol=1e-10)


def test_stage_one_requires_free_last_agent(straight_boundaries):
    spec = triangle_spec("reciprocal", steps=8)
    with pytest.raises(ValueError, match="agent 2"):
        stage_one(spec, straight_boundaries, np.zeros((3, 8, 3)), SolverConfig())


@pytest.mark.parametrize("coupling", ["staged", "reciprocal"])
def test_solve_hits_endpoints(coupling):
    spec = triangle_spec(coupling, steps=8)
    bounds = [
        AgentBoundary(P(0, 0, 0), P(1, 0.2, 0.1), [0, 1], [0, 1]),
        AgentBoundary(P(0, 0.9, 0), P(1, 1.0, 0.0), [0, 1], [0, 1]),
        AgentBoundary(P(0, 1.8, 0), P(1, 1.8, -0.2), [0, 1], [0, 1]),
    ]
    rep = solve(spec, bounds, SolverConfig(tol=1e-10))
    assert rep.converged
    assert rep.final_residual < 1e-10
    traj = rep.trajectory
    for i, b in enumerate(bounds):
        np.testing.assert_allclose(traj.pos[i, -1], b.gT.pos, atol=1e-9)
        np.testing.assert_allclose(traj.rot[i, -1], b.gT.rot, atol=1e-9)
        np.testing.assert_allclose(traj.pos[i, 0], b.g0.pos, atol=0)
    assert rep.edge_clearance > 0
    assert len(rep.stage_iterations) == (2 if coupling == "staged" else 1)
    assert full_residual(traj, bounds) == pytest.approx(rep.final_residual)
    assert set(rep.summary()) >= {"converged", "final_residual", "min_separation", "wall_time"}


def test_straight_lanes_solve_exactly(straight_boundaries):
    spec = FormationSpec(3, steps=8)  # no edges: every agent is free
    rep = solve(spec, straight_boundaries, SolverConfig(initial_guess="zero", tol=1e-12))
    np.testing.assert_allclose(rep.trajectory.x[..., 1], 1.0, atol=1e-9)
    assert rep.boundary_defect < 1e-9


def test_order_two_solve(straight_boundaries):
    spec = triangle_spec(steps=8, sigma=0.05)
    rep = solve(spec, straight_boundaries, SolverConfig(order=2))
    assert rep.converged and rep.trajectory.max_step_residual(order=2) < 1e-8


def test_enforced_boundary_controls_reduce_defect():
    spec = triangle_spec(steps=8)
    bounds = [
        AgentBoundary(P(0, 0, 0), P(1, 0.2, 0), [0, 1], [0, 1]),
        AgentBoundary(P(0, 0.8, 0), P(1, 0.9, 0), [0, 1], [0, 1]),
        AgentBoundary(P(0, 1.6, 0), P(1, 1.6, 0.3), [0, 1], [0, 1]),
    ]
    plain = solve(spec, bounds)
    forced = solve(spec, bounds, SolverConfig(enforce_boundary_controls=True))
    assert forced.boundary_defect < plain.boundary_defect


def test_no_convergence_reports_iterations():
    spec = triangle_spec(steps=8)
    bounds = [
        AgentBoundary(P(0, 0, 0), P(1, 0.5, 1.0)),
        AgentBoundary(P(0, 0.9, 0), P(1, 1.4, 0.5)),
        AgentBoundary(P(0, 1.8, 0), P(2, 1.0, -1.0)),
    ]
    with pytest.raises(NoConvergence) as info:
        solve(spec, bounds, SolverConfig(max_iter=1, tol=1e-12, initial_guess="zero"))
    assert info.value.iterations == 1


def test_validation():
    spec = triangle_spec(steps=8)
    ok = [AgentBoundary(P(0, y, 0), P(1, y, 0)) for y in (0.0, 1.0, 2.0)]
    with pytest.raises(ValueError, match="3 agents"):
        validate_problem(spec, ok[:2])
    close = [AgentBoundary(P(0, 0, 0), P(1, 0, 0)), AgentBoundary(P(0.05, 0, 0), P(1, 1, 0)), ok[2]]
    with pytest.raises(ValueError, match="agents 0 and 1"):
        validate_problem(spec, close)
    inside = [ok[0], AgentBoundary(P(0, 0.3, 0), P(1, 1, 0)), ok[2]]
    with pytest.raises(ValueError, match=r"edge \(0, 1\)"):
        validate_problem(spec, inside)
    with pytest.warns(UserWarning, match="safety radius"):
        validate_problem(spec.with_(safety_radius=0.6), ok)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        validate_problem(spec, ok)


def test_convergence_study_shape():
    spec = FormationSpec(2, (Edge(0, 1, 0.5, 0.1),), horizon=0.5)
    rot = np.array([np.eye(2)] * 2)
    pos = np.array([[0.0, 0.0], [1.5, 0.0]])
    mu = np.array([[0.3, 1.0, 0.1], [0.0, 1.0, 0.0]])
    study = convergence_study(spec, rot, pos, mu, 2, steps=(10, 20, 40), reference_dt=1e-4)
    assert len(study.errors) == 3
    assert study.errors[0] > study.errors[-1]
    assert 1.6 < study.slope < 2.4


def test_trajectory_type(straight_boundaries):
    rep = solve(FormationSpec(3, steps=4), straight_boundaries)
    assert isinstance(rep.trajectory, DiscreteTrajectory)
    assert rep.trajectory.g(0, 4).pos == pytest.approx([1.0, 0.0])
    np.testing.assert_allclose(rep.trajectory.theta()[:, -1], 0.0, atol=1e-12)
