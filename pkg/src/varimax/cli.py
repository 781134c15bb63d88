"""Command-line front end: ``varimax solve | scan | verify``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .el import ShootingUnknowns, classify_saddle, oracle_discrete_saddle, saddle_probe, solve_el
from .errors import InvalidProblem, ProblemNotFound, VarimaxError
from .numerics import NewtonConfig, default_n_nodes
from .oc import OCShootingUnknowns, solve_oc
from .problems import Box, OCProblem, VariationalProblem, lookup, transform_initial_uncertainty
from .robust import box_grid, oc_saddle_probe, robust_candidates, worst_case_scan

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3
SOLVERS = ("el", "oc", "oc-initial-uncertainty")
ORACLE_TOL = 5e-3
PROBE_MAGNITUDES = (0.01, 0.05)


class UsageError(VarimaxError):
    pass


# ---------------------------------------------------------------------------
# request plumbing


def parse_guess(text: Optional[str]) -> dict:
    """``"a=1.5,tf=0.5,xdot0=-1,p0=3:3"``; vector components are ``:``-separated."""
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("a", "tf", "xdot0", "p0"):
            raise UsageError(f"bad guess entry {item!r}; expected a=, tf=, xdot0= or p0=")
        try:
            nums = [float(v) for v in val.split(":")]
        except ValueError:
            raise UsageError(f"bad number in guess entry {item!r}") from None
        out[key] = nums[0] if key in ("tf", "xdot0") and len(nums) == 1 else tuple(nums)
        if key in ("tf", "xdot0") and len(nums) != 1:
            raise UsageError(f"{key} takes a single value")
    return out


def default_solver(problem) -> str:
    if isinstance(problem, VariationalProblem):
        return "el"
    return "oc-initial-uncertainty" if problem.additive_initial_uncertainty else "oc"


def resolve_problem(name: str, negate: bool = False):
    problem = lookup(name)
    if negate:
        if not isinstance(problem, VariationalProblem):
            raise UsageError("--negate is only supported for variational problems")
        problem = problem.negated()
    return problem


def _config(args) -> NewtonConfig:
    kw = {}
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    try:
        return NewtonConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_solver(problem, solver: str) -> None:
    el = isinstance(problem, VariationalProblem)
    if el != (solver == "el"):
        raise UsageError(f"solver {solver!r} does not fit problem type {type(problem).__name__}")
    if solver == "oc-initial-uncertainty" and not problem.additive_initial_uncertainty:
        raise UsageError("problem does not declare an uncertain initial state")


def run_solve(problem, solver: str, guess: dict, cfg: NewtonConfig, n_nodes: int):
    """Returns ``(solution, solved_problem)``; the latter is the shifted problem when transformed."""
    try:
        if solver == "el":
            return solve_el(problem, ShootingUnknowns.from_guess(problem, guess), cfg, n_nodes), problem
        target = transform_initial_uncertainty(problem) if solver == "oc-initial-uncertainty" else problem
        sol = solve_oc(target, OCShootingUnknowns.from_guess(target, guess), cfg, n_nodes)
        return sol, target
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# serialization


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def trajectory_table(sol, problem, solver: str, shifted=None):
    t = sol.grid.times
    if solver == "el":
        return ["t", "x", "xdot"], np.column_stack([t, sol.x.values, sol.xdot.values])
    x = sol.x.values
    if shifted is not None and shifted is not problem:
        x = shifted.back_map(x, sol.a_star)
    n, r = sol.x.dim, sol.u.dim
    cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(r)]
    return cols, np.column_stack([t, x, sol.p.values, sol.u.values])


def solution_record(name, solver, sol, problem, shifted, cfg, n_nodes, guess) -> dict:
    rep = sol.report
    cols, table = trajectory_table(sol, problem, solver, shifted)
    return _jsonable(
        {
            "problem": name,
            "solver": solver,
            "converged": sol.converged,
            "a_star": sol.a_star,
            "tf": sol.tf,
            "cost": sol.cost,
            "residual_norm": sol.residual_norm,
            "newton_iterations": sol.newton_iterations,
            "classification": rep.classification.value if rep else None,
            "conditions": rep.conditions if rep else {},
            "second_order": {
                "I_aa": rep.I_aa,
                "min_g_xx": rep.min_gxx,
                "max_g_xx": rep.max_gxx,
                "min_velocity_curvature": rep.min_gxdxd,
                "linear_in_x": rep.linear_in_x,
            }
            if rep
            else {},
            "trajectory": {"columns": cols, "rows": table},
            "version": __version__,
            "config": {
                "n_nodes": n_nodes,
                "tol": cfg.tol,
                "max_iter": cfg.max_iter,
                "guess": guess,
            },
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
    )


def write_json(path, record: dict) -> None:
    # float repr is the shortest string that round-trips (<= 17 significant digits)
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_trajectory_csv(path, cols, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in table:
            w.writerow([f"{v:.17g}" for v in row])


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    problem = resolve_problem(args.problem, args.negate)
    solver = args.solver or default_solver(problem)
    _check_solver(problem, solver)
    cfg = _config(args)
    n_nodes = args.n_nodes or default_n_nodes()
    guess = parse_guess(args.guess)
    sol, target = run_solve(problem, solver, guess, cfg, n_nodes)
    record = solution_record(args.problem, solver, sol, problem, target, cfg, n_nodes, guess)
    if args.out:
        if args.format == "csv":
            cols, table = trajectory_table(sol, problem, solver, target)
            write_trajectory_csv(args.out, cols, table)
        else:
            write_json(args.out, record)
    a_txt = ", ".join(f"{v:.8g}" for v in sol.a_star)
    print(
        f"{args.problem}: a*=[{a_txt}] tf={sol.tf:.8g} J*={sol.cost:.10g} "
        f"class={record['classification']} residual={sol.residual_norm:.3e} "
        f"{'converged' if sol.converged else 'NOT CONVERGED'}"
    )
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def scan_grid(problem: OCProblem, a_min, a_max, steps: int):
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    if a_min is None and a_max is None:
        if not isinstance(problem.uncertainty, Box):
            raise UsageError("problem has no box uncertainty; pass --a-min/--a-max")
        return box_grid(problem.uncertainty, steps)
    if a_min is None or a_max is None:
        raise UsageError("pass both --a-min and --a-max")
    if problem.m != 1:
        raise UsageError("explicit a-ranges are only supported for scalar parameters")
    if a_max < a_min:
        raise UsageError("--a-max must not be below --a-min")
    if a_max == a_min:
        return np.array([[a_min]])
    return np.linspace(a_min, a_max, steps)[:, None]


def cmd_scan(args) -> int:
    problem = resolve_problem(args.problem)
    if not isinstance(problem, OCProblem):
        raise UsageError("scan needs an optimal-control problem")
    grid = scan_grid(problem, args.a_min, args.a_max, args.steps)
    cfg = _config(args)
    n_nodes = args.n_nodes or default_n_nodes()
    cands = robust_candidates(problem, cfg, n_nodes)
    if not cands:
        print(f"{args.problem}: no converged candidate control", file=sys.stderr)
        return EXIT_NONCONVERGED
    box = problem.uncertainty if isinstance(problem.uncertainty, Box) else None
    result = worst_case_scan(problem, cands, grid, box=box)
    out = Path(args.out)
    result.write_csv(out)
    summary = result.summary()
    summary["problem"] = args.problem
    summary["candidates"] = {
        c.label: {"frozen_a": c.frozen_a, "a_star": c.solution.a_star, "cost": c.solution.cost} for c in cands
    }
    summary["version"] = __version__
    write_json(out.with_suffix(".json"), _jsonable(summary))
    worst = ", ".join(f"{lab}={v:.6g}" for lab, v in zip(result.labels, result.worst_case))
    print(f"{args.problem}: worst case {worst}; winner {result.winner_label}")
    return EXIT_OK


def _el_checks(problem: VariationalProblem, sol, n_nodes) -> list:
    rep = sol.report or classify_saddle(problem, sol)
    checks = [("converged", sol.converged, f"residual {sol.residual_norm:.2e}")]
    for key in ("el_equation", "stationarity", "boundary"):
        checks.append((key, rep.conditions[key], ""))
    checks.append(("min-max classification", rep.classification.value == "min-max", rep.classification.value))
    for mag in PROBE_MAGNITUDES:
        pr = saddle_probe(problem, sol, 100, mag)
        checks.append((f"saddle probe {mag:g}", pr.violations == 0, f"{pr.violations} violations"))
    oracle_fits = not problem.boundary.free_time and problem.param_dim == 1
    if oracle_fits and all(ok for _, ok, _ in checks):
        try:
            orc = oracle_discrete_saddle(problem)
            da = float(np.max(np.abs(orc.a_star - sol.a_star)))
            dJ = abs(orc.J_star - sol.cost)
            checks.append(("discrete oracle", da <= ORACLE_TOL and dJ <= ORACLE_TOL, f"|da|={da:.1e} |dJ|={dJ:.1e}"))
        except VarimaxError as exc:
            checks.append(("discrete oracle", False, str(exc)))
    return checks


def _oc_checks(problem: OCProblem, sol, cfg, n_nodes) -> list:
    rep = sol.report
    checks = [("converged", sol.converged, f"residual {sol.residual_norm:.2e}")]
    for key in ("control_stationarity", "stationarity", "boundary"):
        checks.append((key, rep.conditions[key], ""))
    target, target_sol = problem, sol
    if isinstance(problem.uncertainty, Box) and not sol.in_uncertainty_set:
        cands = robust_candidates(problem, cfg, n_nodes, interior=sol)
        res = worst_case_scan(problem, cands, box_grid(problem.uncertainty, 101))
        checks.append(("boundary selection", np.isfinite(res.worst_case[res.winner]), f"winner {res.winner_label}"))
        target_sol = cands[res.winner].solution
    else:
        checks.append(("min-max classification", rep.classification.value == "min-max", rep.classification.value))
    for mag in PROBE_MAGNITUDES:
        pr = oc_saddle_probe(target, target_sol, 100, mag)
        checks.append((f"saddle probe {mag:g}", pr.violations == 0, f"{pr.violations} violations"))
    return checks


def cmd_verify(args) -> int:
    problem = resolve_problem(args.problem, args.negate)
    solver = args.solver or default_solver(problem)
    _check_solver(problem, solver)
    cfg = _config(args)
    n_nodes = args.n_nodes or default_n_nodes()
    sol, target = run_solve(problem, solver, parse_guess(args.guess), cfg, n_nodes)
    if solver == "el":
        checks = _el_checks(problem, sol, n_nodes)
    else:
        checks = _oc_checks(target, sol, cfg, n_nodes)
    width = max(len(name) for name, _, _ in checks)
    for name, ok, note in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {note}".rstrip())
    passed = all(ok for _, ok, _ in checks)
    print(f"{args.problem}: {'all checks passed' if passed else 'verification FAILED'}")
    return EXIT_OK if passed else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varimax", description="Min-max solver for uncertain variational problems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver=True):
        p.add_argument("--problem", required=True, help="registered problem name")
        p.add_argument("--n-nodes", type=int, default=None, help="grid size (default 1001 or $VARIMAX_N_NODES)")
        p.add_argument("--tol", type=float, default=None, help="Newton residual tolerance")
        p.add_argument("--max-iter", type=int, default=None, help="Newton iteration cap")
        if solver:
            p.add_argument("--solver", choices=SOLVERS, default=None)
            p.add_argument("--guess", default=None, help="e.g. a=1.5,tf=0.5,xdot0=-1 or p0=3:3")
            p.add_argument("--negate", action="store_true", help="flip the sign of the integrand")

    p = sub.add_parser("solve", help="solve and classify one problem")
    common(p)
    p.add_argument("--out", default=None, help="output path for the solution record")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scan", help="worst-case cost scan over the uncertainty box")
    common(p, solver=False)
    p.add_argument("--a-min", type=float, default=None)
    p.add_argument("--a-max", type=float, default=None)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--out", required=True, help="CSV path; the worst-case table goes next to it as .json")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="solve, classify and probe the saddle inequality")
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.n_nodes is not None and args.n_nodes < 2:
        print("error: --n-nodes must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ProblemNotFound, InvalidProblem, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VarimaxError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
