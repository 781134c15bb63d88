"""Bounded uncertainty: boundary candidates and worst-case cost scans.

When the stationary parameter leaves the box, each box vertex is frozen
and solved as an ordinary optimal-control problem.  Every candidate
control is then replayed open-loop across a grid of parameter values and
the control with the smallest worst case over the box wins.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import IntegrationDiverged, InvalidProblem, VarimaxError
from .numerics import NewtonConfig, TimeGrid, Trajectory, quadrature
from .oc import OCSolution, oc_cost, solve_oc
from .problems import Box, OCProblem

VERTEX_CAP = 64


@dataclass
class CandidateControl:
    label: str
    frozen_a: object  # parameter vector, or "interior"
    solution: OCSolution


@dataclass
class ScanResult:
    labels: list
    a_grid: np.ndarray  # (K, m)
    cost_matrix: np.ndarray  # (C, K)
    in_box: np.ndarray  # (K,) bool
    worst_case: np.ndarray  # (C,)
    winner: int
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))  # (C, K)

    @property
    def winner_label(self) -> str:
        return self.labels[self.winner]

    def write_csv(self, path) -> None:
        m = self.a_grid.shape[1]
        a_cols = ["a"] if m == 1 else [f"a{i + 1}" for i in range(m)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(a_cols + [f"J_{lab}" for lab in self.labels])
            for k in range(self.a_grid.shape[0]):
                row = [f"{v:.17g}" for v in self.a_grid[k]]
                row += [f"{v:.17g}" for v in self.cost_matrix[:, k]]
                w.writerow(row)

    def summary(self) -> dict:
        return {
            "labels": list(self.labels),
            "worst_case": {lab: float(v) for lab, v in zip(self.labels, self.worst_case)},
            "winner": self.winner_label,
            "grid_points": int(self.a_grid.shape[0]),
            "grid_points_in_box": int(self.in_box.sum()),
        }


def boundary_candidates(problem: OCProblem, box: Optional[Box] = None, interior_a=None, cap: int = VERTEX_CAP):
    """Frozen-parameter problems at the box vertices.

    Returns an empty list when ``interior_a`` is given and lies inside the
    box (the interior solution stands).
    """
    box = box if box is not None else problem.uncertainty
    if not isinstance(box, Box):
        raise InvalidProblem("boundary candidates need a Box uncertainty set")
    if interior_a is not None and box.contains(interior_a):
        return []
    if 2 ** box.dim > cap:
        raise InvalidProblem(f"{2 ** box.dim} box vertices exceed the cap of {cap}")
    verts = itertools.product(*zip(box.lo, box.hi))
    return [problem.freeze(v) for v in verts]


def _control_samples(control: Trajectory):
    """Control at the nodes and at the interval midpoints (cubic spline)."""
    grid = control.grid
    spline = CubicSpline(grid.times, control.values, axis=0)
    mids = grid.times[:-1] + 0.5 * grid.spacing
    return control.values, spline(mids)


def _replay(problem: OCProblem, u_nodes, u_mids, a, grid: TimeGrid) -> float:
    t = grid.times
    h = grid.spacing
    x = problem.x0.copy()
    X = np.empty((grid.n_nodes, x.size))
    X[0] = x
    for i in range(grid.n_nodes - 1):
        k1 = problem.dynamics(x, u_nodes[i], a, t[i])
        k2 = problem.dynamics(x + 0.5 * h * k1, u_mids[i], a, t[i] + 0.5 * h)
        k3 = problem.dynamics(x + 0.5 * h * k2, u_mids[i], a, t[i] + 0.5 * h)
        k4 = problem.dynamics(x + h * k3, u_nodes[i + 1], a, t[i + 1])
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationDiverged(i + 1)
        X[i + 1] = x
    return oc_cost(problem, X, u_nodes, a, grid)


def evaluate_cost_at(problem: OCProblem, control: Trajectory, a) -> float:
    """Cost of replaying a fixed control signal under parameter ``a``.

    The state equation is re-integrated with RK4 on the control's grid,
    reading the control between nodes from a cubic spline.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    un, um = _control_samples(control)
    return _replay(problem, un, um, a, control.grid)


def _replay_batched(problem: OCProblem, u_nodes, u_mids, A: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """All grid parameters at once, passing component-major arrays.

    States are ``(n, K)`` and parameters ``(m, K)`` so that user functions
    written with ``x[0]``-style indexing broadcast over the batch.
    """
    K = A.shape[0]
    aT = A.T
    t = grid.times
    h = grid.spacing
    n = problem.n

    def f(x, u, tau):
        d = np.asarray(problem.f(x, np.broadcast_to(u[:, None], (u.size, K)), aT, tau), dtype=float)
        if d.shape != (n, K):
            raise ValueError("dynamics do not broadcast")
        return d

    def g(x, u, tau):
        v = np.asarray(problem.g(x, np.broadcast_to(u[:, None], (u.size, K)), aT, tau), dtype=float)
        return np.broadcast_to(v, (K,))

    x = np.repeat(problem.x0[:, None], K, axis=1)
    run = np.empty((grid.n_nodes, K))
    run[0] = g(x, u_nodes[0], t[0])
    for i in range(grid.n_nodes - 1):
        k1 = f(x, u_nodes[i], t[i])
        k2 = f(x + 0.5 * h * k1, u_mids[i], t[i] + 0.5 * h)
        k3 = f(x + 0.5 * h * k2, u_mids[i], t[i] + 0.5 * h)
        k4 = f(x + h * k3, u_nodes[i + 1], t[i + 1])
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        run[i + 1] = g(x, u_nodes[i + 1], t[i + 1])
    term = np.broadcast_to(np.asarray(problem.h(x, grid.tf), dtype=float), (K,))
    out = term + quadrature(run, grid)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite batched cost")
    return np.asarray(out, dtype=float)


def evaluate_costs(problem: OCProblem, control: Trajectory, A) -> tuple:
    """Costs of one control over many parameters; returns ``(costs, failed)``.

    Uses a single batched integration when the problem's functions broadcast,
    otherwise (or on any failure) falls back to one replay per parameter.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    un, um = _control_samples(control)
    if type(problem) is OCProblem:
        try:
            with np.errstate(all="raise"):
                return _replay_batched(problem, un, um, A, control.grid), np.zeros(len(A), bool)
        except (ValueError, TypeError, IndexError, FloatingPointError):
            pass
    costs = np.full(len(A), np.nan)
    failed = np.zeros(len(A), bool)
    for k, a in enumerate(A):
        try:
            costs[k] = _replay(problem, un, um, a, control.grid)
        except (VarimaxError, FloatingPointError, ValueError):
            failed[k] = True
    return costs, failed


def box_grid(box: Box, steps: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, steps) for lo, hi in zip(box.lo, box.hi)]
    return np.array(list(itertools.product(*axes)))


def worst_case_scan(
    problem: OCProblem,
    candidates: Sequence[CandidateControl],
    a_grid,
    box: Optional[Box] = None,
) -> ScanResult:
    """Cost of every candidate at every grid point; pick the min worst case.

    Grid points outside ``box`` are evaluated and reported but do not count
    toward the worst case.  A candidate with any failed cell is disqualified.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    box = box if box is not None else (problem.uncertainty if isinstance(problem.uncertainty, Box) else None)
    A = np.asarray(a_grid, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    in_box = np.array([box.contains(a, tol=1e-12) for a in A]) if box is not None else np.ones(len(A), bool)
    C = np.full((len(candidates), len(A)), np.nan)
    failed = np.zeros_like(C, dtype=bool)
    base = problem if problem.frozen_a is None else OCProblem(
        **{**problem.__dict__, "frozen_a": None}
    )
    for i, cand in enumerate(candidates):
        C[i], failed[i] = evaluate_costs(base, cand.solution.u, A)
    worst = np.array([
        np.inf if failed[i].any() or not in_box.any() else float(np.max(C[i, in_box]))
        for i in range(len(candidates))
    ])
    winner = int(np.argmin(worst))  # argmin keeps the lowest index on ties
    return ScanResult([c.label for c in candidates], A, C, in_box, worst, winner, failed)


def robust_candidates(
    problem: OCProblem,
    cfg: Optional[NewtonConfig] = None,
    n_nodes: Optional[int] = None,
    interior: Optional[OCSolution] = None,
) -> list:
    """Interior solution plus, when it leaves the box, the solved vertex problems."""
    interior = interior if interior is not None else solve_oc(problem, cfg=cfg, n_nodes=n_nodes, classify=False)
    cands = []
    if interior.converged:
        cands.append(CandidateControl("u", "interior", interior))
    if isinstance(problem.uncertainty, Box):
        frozen = boundary_candidates(problem, interior_a=interior.a_star if interior.converged else None)
        for j, fp in enumerate(frozen, start=1):
            sol = solve_oc(fp, cfg=cfg, n_nodes=n_nodes, classify=False)
            if sol.converged:
                cands.append(CandidateControl(f"u{j}", np.array(fp.frozen_a), sol))
    return cands


@dataclass
class OCProbeReport:
    n_probes: int
    magnitude: float
    violations_u: int
    violations_a: int
    worst_margin: float

    @property
    def violations(self) -> int:
        return self.violations_u + self.violations_a


def oc_saddle_probe(
    problem: OCProblem,
    sol: OCSolution,
    n_probes: int = 100,
    magnitude: float = 0.05,
    seed: int = 0,
) -> OCProbeReport:
    """Check ``J(u*, a*+da) <= J(u*, a*) <= J(u*+du, a*)`` by open-loop replay.

    Parameter perturbations are clipped to a Box uncertainty set.  Control
    perturbations are only drawn when the final state is free, since a
    replayed control cannot honour a fixed endpoint.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    base = problem if problem.frozen_a is None else OCProblem(**{**problem.__dict__, "frozen_a": None})
    rng = np.random.default_rng(seed)
    grid = sol.grid
    a = sol.a_star
    J0 = evaluate_cost_at(base, sol.u, a)
    tol = 1e-9 * (1.0 + abs(J0))
    s = (grid.times - grid.t0) / (grid.tf - grid.t0)
    vu = va = 0
    worst = np.inf
    box = base.uncertainty if isinstance(base.uncertainty, Box) else None
    for _ in range(n_probes):
        if not base.boundary.fixed_state:
            du = np.zeros_like(sol.u.values)
            for k in range(1, 5):
                du += np.outer(np.sin(k * np.pi * s + rng.uniform(0, np.pi)), rng.normal(size=base.r))
            du *= magnitude / max(np.max(np.abs(du)), 1e-300)
            margin = evaluate_cost_at(base, Trajectory(grid, sol.u.values + du, "control"), a) - J0
            worst = min(worst, margin)
            vu += margin < -tol
        if a.size:
            d = rng.normal(size=a.size)
            d *= magnitude / np.linalg.norm(d)
            ap = a + d
            if box is not None:
                ap = np.clip(ap, box.lo, box.hi)
            if np.allclose(ap, a):
                continue
            margin = J0 - evaluate_cost_at(base, sol.u, ap)
            worst = min(worst, margin)
            va += margin < -tol
    return OCProbeReport(n_probes, magnitude, int(vu), int(va), float(worst))
