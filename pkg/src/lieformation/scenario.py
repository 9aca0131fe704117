"""Scenario files: YAML documents describing a formation problem.

Schema::

    name: str                       # optional
    safety_radius: float            # default 0.1
    agents:                         # one entry per agent, indexed from 0
      - initial: [x, y, theta]
        final: [x, y, theta]
        u0: [u1, u2]                # optional boundary controls
        uT: [u1, u2]
        weights: [w1, w2]           # optional, default [1, 1]
        mu0: [m1, m2, m3]           # optional initial momentum for simulate/order
    edges:
      - {i: 0, j: 1, d: 0.5, sigma: 0.1}
    solver:
      T: 1.0
      N: 20
      tol: 1.0e-8
      max_iter: 200
      guess: linear-interpolation   # zero | linear-interpolation | free-flow
      order: 1                      # 1 | 2
      coupling: staged              # staged | reciprocal

Angles are in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .bvp import AgentBoundary, SolverConfig
from .formation import Edge, FormationSpec
from .se2 import GroupElement

BUNDLED = ("three_unicycles",)


class ScenarioError(ValueError):
    """Raised for malformed scenario documents."""


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    spec: FormationSpec
    bounds: tuple[AgentBoundary, ...]
    config: SolverConfig
    mu0: np.ndarray  # (r, 3)

    def with_overrides(self, tol: float | None = None, steps: int | None = None, order: int | None = None) -> Scenario:
        spec, config = self.spec, self.config
        if steps is not None:
            spec = spec.with_(steps=steps)
        changes = {}
        if tol is not None:
            changes["tol"] = tol
        if order is not None:
            changes["order"] = order
        if changes:
            config = replace(config, **changes)
        return Scenario(self.name, spec, self.bounds, config, self.mu0)


def _vector(value, length: int, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).ravel()
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: expected {length} numbers, got {value!r}") from exc
    if arr.size != length:
        raise ScenarioError(f"{where}: expected {length} numbers, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{where}: values must be finite")
    return arr


def resolve_path(name_or_path: str | Path) -> Path:
    """Path of a scenario file; bare bundled names resolve to the packaged copies."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name.removesuffix(".yaml")
    if stem in BUNDLED:
        return Path(str(resources.files("lieformation") / "scenarios" / f"{stem}.yaml"))
    raise ScenarioError(f"scenario file not found: {name_or_path}")


def load(name_or_path: str | Path) -> Scenario:
    path = resolve_path(name_or_path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML ({exc})") from exc
    return parse(doc, default_name=path.stem)


def parse(doc, default_name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    agents = doc.get("agents")
    if not isinstance(agents, list) or not agents:
        raise ScenarioError("scenario needs a non-empty 'agents' list")
    solver = doc.get("solver", {}) or {}
    if not isinstance(solver, dict):
        raise ScenarioError("'solver' must be a mapping")

    bounds, weights, mu0 = [], [], []
    for k, a in enumerate(agents):
        if not isinstance(a, dict):
            raise ScenarioError(f"agent {k}: entry must be a mapping")
        for key in ("initial", "final"):
            if key not in a:
                raise ScenarioError(f"agent {k}: missing '{key}' pose")
        x0 = _vector(a["initial"], 3, f"agent {k} initial")
        xT = _vector(a["final"], 3, f"agent {k} final")
        u0 = _vector(a["u0"], 2, f"agent {k} u0") if a.get("u0") is not None else None
        uT = _vector(a["uT"], 2, f"agent {k} uT") if a.get("uT") is not None else None
        w = _vector(a.get("weights", [1.0, 1.0]), 2, f"agent {k} weights")
        if np.any(w <= 0):
            raise ScenarioError(f"agent {k}: weights must be positive")
        if a.get("mu0") is not None:
            m = _vector(a["mu0"], 3, f"agent {k} mu0")
        elif u0 is not None:
            m = np.array([w[0] * u0[0], w[1] * u0[1], 0.0])
        else:
            m = np.zeros(3)
        bounds.append(AgentBoundary(GroupElement.from_pose(*x0), GroupElement.from_pose(*xT), u0, uT))
        weights.append(w)
        mu0.append(m)

    r = len(agents)
    edges = []
    for k, e in enumerate(doc.get("edges", []) or []):
        if not isinstance(e, dict) or not {"i", "j", "d", "sigma"} <= set(e):
            raise ScenarioError(f"edge {k}: needs keys i, j, d, sigma")
        try:
            i, j = int(e["i"]), int(e["j"])
            d, sigma = float(e["d"]), float(e["sigma"])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"edge {k}: malformed values {e!r}") from exc
        for idx in (i, j):
            if not 0 <= idx < r:
                raise ScenarioError(f"edge ({i}, {j}) references missing agent {idx} (scenario has {r} agents)")
        if i == j:
            raise ScenarioError(f"edge ({i}, {j}) joins an agent to itself")
        if not (math.isfinite(d) and math.isfinite(sigma)):
            raise ScenarioError(f"edge ({i}, {j}): d and sigma must be finite")
        edges.append(Edge(min(i, j), max(i, j), d, sigma))

    try:
        spec = FormationSpec(
            r,
            tuple(edges),
            safety_radius=float(doc.get("safety_radius", 0.1)),
            horizon=float(solver.get("T", 1.0)),
            steps=int(solver.get("N", 20)),
            weights=np.array(weights),
            coupling=str(solver.get("coupling", "staged")),
        )
        config = SolverConfig(
            tol=float(solver.get("tol", 1e-8)),
            max_iter=int(solver.get("max_iter", 200)),
            initial_guess=str(solver.get("guess", "linear-interpolation")),
            order=int(solver.get("order", 1)),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(str(doc.get("name", default_name)), spec, tuple(bounds), config, np.array(mu0))
