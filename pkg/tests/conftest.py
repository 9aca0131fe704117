import numpy as np
import pytest
from hypothesis import strategies as st

from lieformation import scenario
from lieformation.bvp import AgentBoundary
from lieformation.formation import Edge, FormationSpec
from lieformation.se2 import GroupElement

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
poses = st.tuples(finite, finite, st.floats(min_value=-3.1, max_value=3.1)).map(lambda t: GroupElement.from_pose(*t))
# Cayley coordinates well inside the chart (rotation angle < pi)
chart = st.tuples(st.floats(-4.0, 4.0), finite, finite).map(np.array)


def random_group(rng, spread=3.0):
    return GroupElement.from_pose(*rng.uniform(-spread, spread, 2), rng.uniform(-np.pi + 0.01, np.pi - 0.01))


def triangle_spec(coupling="staged", sigma=0.1, d=0.5, **kw):
    edges = tuple(Edge(i, j, d, sigma) for i, j in [(0, 1), (0, 2), (1, 2)])
    return FormationSpec(3, edges, coupling=coupling, **kw)


def spread_state():
    rot = np.array([np.eye(2)] * 3)
    pos = np.array([[0.0, 0.0], [1.5, 0.2], [0.2, 1.5]])
    mu = np.array([[0.5, 1.0, 0.2], [-0.3, 0.8, 0.1], [0.2, 0.9, -0.3]])
    return rot, pos, mu


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def three_unicycles():
    return scenario.load("three_unicycles")


@pytest.fixture
def straight_boundaries():
    """Three agents driving straight along parallel lanes at unit speed."""
    P = GroupElement.from_pose
    return [AgentBoundary(P(0, y, 0), P(1, y, 0), [0, 1], [0, 1]) for y in (0.0, 1.0, 2.0)]
