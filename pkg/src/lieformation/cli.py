"""Command-line front end.

    lieformation {simulate|solve|check|order} SCENARIO [--out DIR] [--tol X] [--steps N] [--order {1,2}]

``SCENARIO`` is a YAML file or the name of a bundled scenario
(``three_unicycles``). With ``--out`` the run writes ``trajectory.csv`` (or
``order.csv``) and ``summary.txt`` into the directory; otherwise the data goes
to stdout and the summary to stderr.

Exit codes: 0 success, 1 invalid scenario or failed check, 2 no convergence,
3 singular potential.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import scenario as scenario_mod
from .bvp import convergence_study, solve, validate_problem
from .continuous import SystemState, integrate
from .discrete import DiscreteTrajectory
from .errors import NoConvergence, SingularityError
from .formation import min_separation

TRAJECTORY_HEADER = ("agent", "k", "t", "x", "y", "theta", "u1", "u2", "mu1", "mu2", "mu3")
EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE, EXIT_SINGULAR = 0, 1, 2, 3


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_trajectory(stream: TextIO, rot, pos, h: float, u=None, mu=None) -> None:
    """Long-format rows for configurations ``(r, K, ...)``; controls may be shorter by one."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    theta = np.arctan2(rot[..., 1, 0], rot[..., 0, 0])
    r, kk = theta.shape
    for i in range(r):
        for k in range(kk):
            has_u = u is not None and k < u.shape[1]
            has_mu = mu is not None and k < mu.shape[1]
            w.writerow(
                [i, k, _fmt(k * h), _fmt(pos[i, k, 0]), _fmt(pos[i, k, 1]), _fmt(theta[i, k])]
                + [_fmt(u[i, k, 0]) if has_u else "", _fmt(u[i, k, 1]) if has_u else ""]
                + ([_fmt(m) for m in mu[i, k]] if has_mu else ["", "", ""])
            )


def read_trajectory(path: Path, spec) -> DiscreteTrajectory:
    """Rebuild a discrete trajectory from a ``solve`` output file."""
    rows = list(csv.DictReader(Path(path).open()))
    r, n = spec.agent_count, spec.steps
    rot = np.zeros((r, n + 1, 2, 2))
    pos = np.zeros((r, n + 1, 2))
    x = np.zeros((r, n, 3))
    for row in rows:
        i, k = int(row["agent"]), int(row["k"])
        th = float(row["theta"])
        rot[i, k] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
        pos[i, k] = float(row["x"]), float(row["y"])
        if k < n:
            x[i, k] = float(row["u1"]), float(row["u2"]), float(row["mu3"])
    return DiscreteTrajectory(rot, pos, x, spec.step_size, spec)


def write_summary(stream: TextIO, items: dict) -> None:
    for key, value in items.items():
        stream.write(f"{key}: {value}\n")


class _Output:
    def __init__(self, out_dir: str | None):
        self.dir = Path(out_dir) if out_dir else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def data(self, name: str, writer) -> None:
        if self.dir:
            with (self.dir / name).open("w", newline="") as fh:
                writer(fh)
        else:
            buf = io.StringIO()
            writer(buf)
            sys.stdout.write(buf.getvalue())

    def summary(self, items: dict) -> None:
        if self.dir:
            with (self.dir / "summary.txt").open("w") as fh:
                write_summary(fh, items)
            write_summary(sys.stdout, items)
        else:
            write_summary(sys.stderr, items)


def cmd_simulate(sc, args, out: _Output) -> int:
    """Continuous RK4 flow from the initial poses and momenta, sampled at the N+1 grid nodes."""
    spec = sc.spec
    h = spec.step_size
    state = SystemState(np.array([b.g0.rot for b in sc.bounds]), np.array([b.g0.pos for b in sc.bounds]), sc.mu0, "lp")
    sub = max(1, int(np.ceil(h / args.dt)))
    t0 = time.perf_counter()
    rots, poss, mus = [state.rot], [state.pos], [state.z]
    for _ in range(spec.steps):
        state, _ = integrate(state, spec, h / sub, state.time + h)
        rots.append(state.rot)
        poss.append(state.pos)
        mus.append(state.z)
    wall = time.perf_counter() - t0
    rot, pos, mu = (np.stack(a, axis=1) for a in (rots, poss, mus))
    u = mu[..., :2] / spec.weights[:, None, :]
    out.data("trajectory.csv", lambda fh: write_trajectory(fh, rot, pos, h, u, mu))
    out.summary(
        {
            "scenario": sc.name,
            "command": "simulate",
            "converged": True,
            "residual": 0.0,
            "min_separation": min(min_separation(pos[:, k]) for k in range(pos.shape[1])) if spec.agent_count > 1 else float("inf"),
            "wall_time": f"{wall:.3f}",
            "dt": h / sub,
        }
    )
    return EXIT_OK


def cmd_solve(sc, args, out: _Output) -> int:
    report = solve(sc.spec, sc.bounds, sc.config)
    traj = report.trajectory
    out.data("trajectory.csv", lambda fh: write_trajectory(fh, traj.rot, traj.pos, traj.h, traj.u, traj.mu))
    items = {"scenario": sc.name, "command": "solve"}
    items.update(report.summary())
    items["residual"] = items.pop("final_residual")
    items["wall_time"] = f"{report.wall_time:.3f}"
    items["stage_iterations"] = ",".join(map(str, report.stage_iterations))
    out.summary(items)
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_check(sc, args, out: _Output) -> int:
    from .checks import run_checks

    t0 = time.perf_counter()
    results = run_checks(sc)
    table = "\n".join(r.line() for r in results) + "\n"
    if out.dir:
        (out.dir / "checks.txt").write_text(table)
    sys.stdout.write(table)
    passed = all(r.passed for r in results)
    out.summary({"scenario": sc.name, "command": "check", "passed": passed, "wall_time": f"{time.perf_counter() - t0:.3f}"})
    return EXIT_OK if passed else EXIT_INVALID


def cmd_order(sc, args, out: _Output) -> int:
    rot = np.array([b.g0.rot for b in sc.bounds])
    pos = np.array([b.g0.pos for b in sc.bounds])
    levels = [int(v) for v in args.levels.split(",")]
    orders = [args.order] if args.order else [1, 2]
    t0 = time.perf_counter()
    reference, _ = integrate(SystemState(rot, pos, sc.mu0, "lp"), sc.spec, args.ref_dt, sc.spec.horizon)
    studies = {o: convergence_study(sc.spec, rot, pos, sc.mu0, o, levels, reference=reference) for o in orders}

    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("order", "N", "h", "error"))
        for o, st in studies.items():
            for n, e in zip(st.steps, st.errors):
                w.writerow((o, n, repr(sc.spec.horizon / n), repr(e)))

    out.data("order.csv", writer)
    items = {"scenario": sc.name, "command": "order"}
    for o, st in studies.items():
        items[f"slope_order{o}"] = f"{st.slope:.4f}"
    items["wall_time"] = f"{time.perf_counter() - t0:.3f}"
    out.summary(items)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "check": cmd_check, "order": cmd_order}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lieformation", description="Optimal formation trajectories on SE(2).")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("scenario", help="scenario YAML file or bundled scenario name")
    p.add_argument("--out", metavar="DIR", help="directory for output files")
    p.add_argument("--tol", type=float, help="Newton tolerance (overrides the scenario)")
    p.add_argument("--steps", type=int, help="number of discrete steps N (overrides the scenario)")
    p.add_argument("--order", type=int, choices=(1, 2), help="potential quadrature order")
    p.add_argument("--dt", type=float, default=1e-3, help="RK4 step bound for simulate (default 1e-3)")
    p.add_argument("--levels", default="10,20,40,80,160", help="step counts for the order study")
    p.add_argument("--ref-dt", type=float, default=1e-5, help="RK4 reference step for the order study")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = scenario_mod.load(args.scenario).with_overrides(args.tol, args.steps, args.order)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            validate_problem(sc.spec, sc.bounds)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return COMMANDS[args.command](sc, args, _Output(args.out))
    except NoConvergence as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except SingularityError as exc:
        where = "" if exc.step is None else f" (step {exc.step})"
        print(f"error: singular potential on edge {exc.edge}{where}: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except ValueError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
