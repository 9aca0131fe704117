"""Invariant suites run by ``lieformation check`` on a scenario."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .continuous import SystemState, casimirs, hamiltonian, integrate, to_ep
from .discrete import DiscreteState, flow_map, step_residual, symplecticity_defect
from .errors import LieFormationError
from .formation import FormationSpec, constraint_residual, planar_residual, potential_grad, potential_value
from .scenario import Scenario
from .se2 import (
    ad,
    cayley,
    cayley_inv,
    coad,
    compose,
    dcay_inv_matrix,
    dcay_inv_matrix_fd,
    left_trivialized_gradient_fd,
)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status:4}  {self.name:28} {self.value:11.3e} < {self.tolerance:.0e}{extra}"


def kernel_identities(rng, samples: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        x, y, z, m = rng.normal(size=(4, 3))
        jac = ad(x, ad(y, z)) + ad(y, ad(z, x)) + ad(z, ad(x, y))
        pair = coad(x, m) @ y - m @ ad(x, y)
        w = rng.normal(size=3) * np.array([1.5, 2.0, 2.0])
        inv = compose(cayley(-w), cayley(w)).matrix - np.eye(3)
        rt = cayley_inv(cayley(w)) - w
        worst = max(worst, *np.abs(jac), abs(pair), *np.abs(inv).ravel(), *np.abs(rt))
    return CheckResult("kernel identities", worst, 1e-10)


def dcay_oracle(rng, samples: int = 100) -> CheckResult:
    worst = max(float(np.max(np.abs(dcay_inv_matrix(w) - dcay_inv_matrix_fd(w)))) for w in rng.normal(size=(samples, 3)))
    return CheckResult("dcay^-1 oracle", worst, 1e-6)


def constraint_equivalence(sc: Scenario) -> CheckResult:
    worst = 0.0
    for b_key in ("g0", "gT"):
        gs = [getattr(b, b_key) for b in sc.bounds]
        for e in sc.spec.edges:
            worst = max(worst, abs(constraint_residual(gs[e.i], gs[e.j], e) - planar_residual(gs[e.i], gs[e.j], e)))
    return CheckResult("constraint equivalence", worst, 1e-12)


def gradient_oracle(sc: Scenario) -> list[CheckResult]:
    worst, e1 = 0.0, 0.0
    gs = [b.g0 for b in sc.bounds]
    for e in sc.spec.edges:
        for slot in ("i", "j"):
            gi, gj = gs[e.i], gs[e.j]
            if slot == "i":
                f = lambda g, gj=gj, e=e: potential_value(g, gj, e)
                g = gi
            else:
                f = lambda g, gi=gi, e=e: potential_value(gi, g, e)
                g = gj
            an = potential_grad(gi, gj, e, slot)
            fd = left_trivialized_gradient_fd(f, g)
            scale = max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, float(np.linalg.norm(an - fd) / scale) if e.sigma else 0.0)
            e1 = max(e1, abs(an[0]))
    return [CheckResult("gradient oracle (relative)", worst, 1e-5), CheckResult("gradient e1 component", e1, 1e-9)]


def _state(sc: Scenario, spec: FormationSpec) -> SystemState:
    return SystemState(
        np.array([b.g0.rot for b in sc.bounds]), np.array([b.g0.pos for b in sc.bounds]), sc.mu0, "lp"
    )


def casimir_drift(sc: Scenario, dt: float = 1e-3) -> CheckResult:
    spec = FormationSpec(sc.spec.agent_count, weights=sc.spec.weights, horizon=sc.spec.horizon)
    s0 = _state(sc, spec)
    s1, _ = integrate(s0, spec, dt, sc.spec.horizon)
    return CheckResult("free Casimir drift", float(np.max(np.abs(casimirs(s1, spec) - casimirs(s0, spec)))), 1e-10)


def hamiltonian_drift(sc: Scenario, dt: float = 1e-4) -> CheckResult:
    spec = sc.spec.with_(coupling="reciprocal")
    s0 = _state(sc, spec)
    s1, _ = integrate(s0, spec, dt, sc.spec.horizon)
    return CheckResult("coupled Hamiltonian drift", abs(hamiltonian(s1, spec) - hamiltonian(s0, spec)), 1e-8)


def ep_lp_agreement(sc: Scenario, dt: float = 1e-3) -> CheckResult:
    s0 = _state(sc, sc.spec)
    lp, _ = integrate(s0, sc.spec, dt, sc.spec.horizon)
    ep, _ = integrate(to_ep(s0, sc.spec), sc.spec, dt, sc.spec.horizon)
    diff = max(
        float(np.max(np.abs(lp.pos - ep.pos))),
        float(np.max(np.abs(lp.rot - ep.rot))),
        float(np.max(np.abs(to_ep(lp, sc.spec).z - ep.z))),
    )
    return CheckResult("EP / LP agreement", diff, 1e-8)


def straight_line(sc: Scenario) -> CheckResult:
    spec = FormationSpec(sc.spec.agent_count, weights=sc.spec.weights)
    h = sc.spec.step_size
    x = np.zeros((spec.agent_count, 3))
    x[:, 1] = 0.7
    state = DiscreteState(np.array([b.g0.rot for b in sc.bounds]), np.array([b.g0.pos for b in sc.bounds]), x)
    worst = 0.0
    for _ in range(5):
        worst = max(worst, float(np.max(np.abs(step_residual(x, x, state.rot, state.pos, spec, h)))))
        state = flow_map(state, spec, h)
        worst = max(worst, float(np.max(np.abs(state.x - x))))
    return CheckResult("exact straight line", worst, 1e-12)


def symplecticity(sc: Scenario) -> CheckResult:
    rot = np.array([b.g0.rot for b in sc.bounds])
    pos = np.array([b.g0.pos for b in sc.bounds])
    h = sc.spec.step_size
    worst = max(symplecticity_defect(rot, pos, sc.mu0, sc.spec, h, order) for order in (1, 2))
    return CheckResult("symplecticity defect", worst, 1e-6)


SUITES: dict[str, Callable] = {
    "kernel": lambda sc, rng: kernel_identities(rng),
    "dcay": lambda sc, rng: dcay_oracle(rng),
    "constraint": lambda sc, rng: constraint_equivalence(sc),
    "gradient": lambda sc, rng: gradient_oracle(sc),
    "casimir": lambda sc, rng: casimir_drift(sc),
    "hamiltonian": lambda sc, rng: hamiltonian_drift(sc),
    "ep-lp": lambda sc, rng: ep_lp_agreement(sc),
    "straight-line": lambda sc, rng: straight_line(sc),
    "symplectic": lambda sc, rng: symplecticity(sc),
}


def run_checks(sc: Scenario, seed: int = 0) -> list[CheckResult]:
    """Run every suite; a suite that raises is reported as a failure with the message."""
    rng = np.random.default_rng(seed)
    results = []
    for name, suite in SUITES.items():
        try:
            out = suite(sc, rng)
            results.extend(out if isinstance(out, list) else [out])
        except (LieFormationError, ValueError, ArithmeticError) as exc:
            results.append(CheckResult(name, float("inf"), 0.0, f"error: {exc}"))
    return results

