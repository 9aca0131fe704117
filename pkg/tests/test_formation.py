import numpy as np
import pytest
from hypothesis import given

from conftest import poses, random_group, triangle_spec
from lieformation.errors import SingularityError
from lieformation.formation import (
    Edge,
    FormationSpec,
    admissible,
    agent_forces,
    constraint_residual,
    cost_gradient,
    cost_value,
    edge_denominators,
    min_separation,
    planar_residual,
    potential_grad,
    potential_value,
    psi,
    total_potential,
)
from lieformation.se2 import GroupElement, left_trivialized_gradient_fd

EDGE = Edge(0, 1, 0.5, 0.3)


def test_spec_defaults_and_step_size():
    spec = FormationSpec(3, horizon=2.0, steps=40)
    assert spec.step_size == pytest.approx(0.05)
    np.testing.assert_array_equal(spec.weights, np.ones((3, 2)))
    assert spec.coupling == "staged"


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(agent_count=2, edges=(Edge(0, 2, 0.5, 0.1),)), "(0, 2)"),
        (dict(agent_count=2, edges=(Edge(1, 0, 0.5, 0.1),)), "(1, 0)"),
        (dict(agent_count=2, edges=(Edge(0, 1, 0.5, 0.1), Edge(0, 1, 0.4, 0.1))), "duplicate"),
        (dict(agent_count=2, edges=(Edge(0, 1, 0.0, 0.1),)), "separation"),
        (dict(agent_count=2, edges=(Edge(0, 1, 0.5, -1.0),)), "sigma"),
        (dict(agent_count=0), "agent_count"),
        (dict(agent_count=2, safety_radius=0.0), "safety_radius"),
        (dict(agent_count=2, steps=1), "steps"),
        (dict(agent_count=2, weights=[[1, 1], [0, 1]]), "weights"),
        (dict(agent_count=2, coupling="mutual"), "coupling"),
    ],
)
def test_spec_validation(kwargs, fragment):
    with pytest.raises(ValueError, match=fragment.replace("(", r"\(").replace(")", r"\)")):
        FormationSpec(**kwargs)


def test_psi_is_pure_translation():
    g = GroupElement.from_pose(1.0, 2.0, 0.7)
    p = psi(g)
    np.testing.assert_array_equal(p.rot, np.eye(2))
    np.testing.assert_array_equal(p.pos, [-1.0, -2.0])


@given(poses, poses)
def test_constraint_equals_planar_residual(gi, gj):
    assert constraint_residual(gi, gj, EDGE) == pytest.approx(planar_residual(gi, gj, EDGE), abs=1e-12 * (1 + np.sum((gi.pos - gj.pos) ** 2)))


def test_potential_value():
    gi = GroupElement.from_pose(0.0, 0.0, 0.4)
    gj = GroupElement.from_pose(1.0, 0.0, -1.0)
    # |p_i - p_j|^2 - d^2 = 0.75
    assert potential_value(gi, gj, EDGE) == pytest.approx(0.3 / 1.5)


def test_potential_singular_at_separation():
    gi = GroupElement.from_pose(0.0, 0.0, 0.0)
    gj = GroupElement.from_pose(0.5, 0.0, 0.0)
    with pytest.raises(SingularityError) as info:
        potential_value(gi, gj, EDGE)
    assert info.value.edge == (0, 1)
    with pytest.raises(SingularityError):
        potential_grad(gi, gj, EDGE, "i")


def test_gradient_matches_finite_differences(rng):
    for _ in range(200):
        gi, gj = random_group(rng), random_group(rng)
        if planar_residual(gi, gj, EDGE) < 0.2:
            continue
        gi_fd = left_trivialized_gradient_fd(lambda g: potential_value(g, gj, EDGE), gi)
        gj_fd = left_trivialized_gradient_fd(lambda g: potential_value(gi, g, EDGE), gj)
        for an, fd in ((potential_grad(gi, gj, EDGE, "i"), gi_fd), (potential_grad(gi, gj, EDGE, "j"), gj_fd)):
            assert np.linalg.norm(an - fd) <= 1e-5 * np.linalg.norm(fd) + 1e-12
            assert abs(an[0]) < 1e-9


def test_gradient_slot_validation():
    g = GroupElement.from_pose(0, 0, 0)
    with pytest.raises(ValueError):
        potential_grad(g, GroupElement.from_pose(2, 0, 0), EDGE, "k")


def test_admissible_is_strict():
    gs = [GroupElement.from_pose(0, 0, 0), GroupElement.from_pose(0.1, 0, 0)]
    assert not admissible(gs, 0.1)
    assert admissible(gs, 0.099)


def test_cost():
    assert cost_value([1.0, 2.0, 0.0], [2.0, 1.0]) == pytest.approx(3.0)
    np.testing.assert_array_equal(cost_gradient([1.0, 2.0, 0.0], [2.0, 1.0]), [2.0, 2.0, 0.0])


def test_feels_and_free_agents():
    staged = triangle_spec("staged")
    recip = triangle_spec("reciprocal")
    e = staged.edge(2, 0)
    assert e.key == (0, 2)
    assert staged.feels(0, e) and not staged.feels(2, e) and not staged.feels(1, e)
    assert recip.feels(2, e)
    assert staged.is_free(2) and not staged.is_free(0)
    assert not recip.is_free(2)
    assert triangle_spec("reciprocal", sigma=0.0).is_free(2)


def _config(rng):
    while True:
        gs = [random_group(rng) for _ in range(3)]
        pos = np.array([g.pos for g in gs])
        if min_separation(pos) > 0.9:
            return gs, np.array([g.rot for g in gs]), pos


def test_agent_forces_sum_edge_gradients(rng):
    for coupling in ("staged", "reciprocal"):
        spec = triangle_spec(coupling, sigma=0.2)
        for _ in range(10):
            gs, rot, pos = _config(rng)
            expect = np.zeros((3, 3))
            for e in spec.edges:
                if spec.feels(e.i, e):
                    expect[e.i] += potential_grad(gs[e.i], gs[e.j], e, "i")
                if spec.feels(e.j, e):
                    expect[e.j] += potential_grad(gs[e.i], gs[e.j], e, "j")
            np.testing.assert_allclose(agent_forces(rot, pos, spec), expect, atol=1e-12)


def test_reciprocal_forces_are_gradient_of_total_potential(rng):
    spec = triangle_spec("reciprocal", sigma=0.2)
    gs, rot, pos = _config(rng)
    forces = agent_forces(rot, pos, spec)
    for a in range(3):
        def f(g, a=a):
            p = pos.copy()
            p[a] = g.pos
            return total_potential(p, spec)

        np.testing.assert_allclose(left_trivialized_gradient_fd(f, gs[a]), forces[a], rtol=1e-6, atol=1e-10)


def test_vectorized_potential_and_denominators(rng):
    spec = triangle_spec(sigma=0.2)
    gs, rot, pos = _config(rng)
    dens = edge_denominators(pos, spec)
    for k, e in enumerate(spec.edges):
        assert dens[k] == pytest.approx(planar_residual(gs[e.i], gs[e.j], e))
    assert total_potential(pos, spec) == pytest.approx(sum(potential_value(gs[e.i], gs[e.j], e) for e in spec.edges))


def test_vectorized_singularity_names_edge_and_step():
    spec = triangle_spec()
    pos = np.array([[0.0, 0.0], [0.2, 0.0], [3.0, 3.0]])
    rot = np.array([np.eye(2)] * 3)
    with pytest.raises(SingularityError) as info:
        agent_forces(rot, pos, spec, step=7)
    assert info.value.edge == (0, 1) and info.value.step == 7
    assert "step 7" in str(info.value)


def test_forces_are_zero_without_gain():
    spec = triangle_spec(sigma=0.0)
    pos = np.array([[0.0, 0.0], [0.2, 0.0], [3.0, 3.0]])  # inside d, but sigma=0 edges are inert
    np.testing.assert_array_equal(agent_forces(np.array([np.eye(2)] * 3), pos, spec), 0.0)


def test_scaled_sigma_and_with():
    spec = triangle_spec(sigma=0.4)
    assert all(e.sigma == pytest.approx(0.1) for e in spec.scaled_sigma(0.25).edges)
    assert spec.with_(horizon=3.0).horizon == 3.0
