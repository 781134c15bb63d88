"""Indirect shooting for min-max optimal control with a constant uncertain parameter.

State and costate are integrated forward from ``(x0, p0)`` with the control
eliminated pointwise from ``H_u = 0``.  Newton adjusts ``p0``, the free
parameter components and (when free) the final time so that parameter
stationarity and the transversality block of the boundary case hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .el import SIGN_BAND, SaddleReport, label_from_signs, _definite
from .errors import ControlSolveFailed, InvalidProblem
from .numerics import (
    NewtonConfig,
    TimeGrid,
    Trajectory,
    default_n_nodes,
    fd_hessian,
    fd_jacobian,
    newton_solve,
    quadrature,
    rk4_integrate,
)
from .problems import (
    FD_STEP,
    FixedTimeFixedState,
    FixedTimeFreeState,
    FreeTimeFixedState,
    FreeTimeFreeState,
    OCProblem,
    SurfaceConstrained,
    transform_initial_uncertainty,
)

CONTROL_TOL = 1e-10
CONTROL_MAX_ITER = 50
# accepted when Newton has stalled: finite-difference H_u bottoms out near 1e-10 |g|
CONTROL_STALL_TOL = 1e-8


def _analytic_gradient(g_z, f_z, k, n):
    """``g_z + f_z^T p`` straight from user partials, skipping the FD-capable accessors."""

    def grad(x, u, p, a, t):
        return np.asarray(g_z(x, u, a, t), dtype=float).reshape(k) + np.asarray(f_z(x, u, a, t), dtype=float).reshape(n, k).T @ p

    return grad


class HamiltonianEval:
    """``H = g + p.f`` and its partials for one problem."""

    def __init__(self, problem: OCProblem):
        self.problem = problem
        # bound once: these sit on the integrator's hot path
        self._g_x, self._f_x = problem.g_x, problem.f_x
        self._g_u, self._f_u = problem.g_u, problem.f_u
        parts = problem.partials
        keys = ("g_u", "f_u", "g_x", "f_x")
        plain = all(getattr(type(problem), k) is getattr(OCProblem, k) for k in keys)
        if plain and all(k in parts for k in keys):
            self.H_u = _analytic_gradient(parts["g_u"], parts["f_u"], problem.r, problem.n)
            self.H_x = _analytic_gradient(parts["g_x"], parts["f_x"], problem.n, problem.n)

    def value(self, x, u, p, a, t) -> float:
        pr = self.problem
        return pr.running(x, u, a, t) + float(p @ pr.dynamics(x, u, a, t))

    def H_x(self, x, u, p, a, t):
        return self._g_x(x, u, a, t) + self._f_x(x, u, a, t).T @ p

    def H_u(self, x, u, p, a, t):
        return self._g_u(x, u, a, t) + self._f_u(x, u, a, t).T @ p

    def H_p(self, x, u, p, a, t):
        return self.problem.dynamics(x, u, a, t)

    def H_a(self, x, u, p, a, t):
        pr = self.problem
        return pr.g_a(x, u, a, t) + pr.f_a(x, u, a, t).T @ p


@dataclass
class OCShootingUnknowns:
    p0: np.ndarray
    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tf: Optional[float] = None

    def __post_init__(self):
        self.p0 = np.atleast_1d(np.asarray(self.p0, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.tf is not None:
            self.tf = float(self.tf)

    def to_vector(self) -> np.ndarray:
        tail = [] if self.tf is None else [self.tf]
        return np.concatenate([self.p0, self.a, tail])

    @classmethod
    def from_vector(cls, problem: OCProblem, z) -> "OCShootingUnknowns":
        z = np.asarray(z, dtype=float)
        n, m = problem.n, problem.free_param_dim
        expected = n + m + (1 if problem.boundary.free_time else 0)
        if z.size != expected:
            raise ValueError(f"expected {expected} unknowns, got {z.size}")
        tf = z[n + m] if problem.boundary.free_time else None
        return cls(z[:n], z[n : n + m], tf)

    @classmethod
    def from_guess(cls, problem: OCProblem, guess: Optional[dict] = None) -> "OCShootingUnknowns":
        g = dict(problem.default_guess)
        g.update(guess or {})
        p0 = np.atleast_1d(np.asarray(g.get("p0", np.zeros(problem.n)), dtype=float))
        if p0.size != problem.n:
            raise ValueError(f"guess for p0 has {p0.size} components, problem has n={problem.n}")
        m = problem.free_param_dim
        a = np.atleast_1d(np.asarray(g.get("a", np.zeros(m)), dtype=float)) if m else np.zeros(0)
        if a.size != m:
            raise ValueError(f"guess for a has {a.size} components, problem has m={m}")
        tf = float(g.get("tf", problem.boundary.t0 + 1.0)) if problem.boundary.free_time else None
        return cls(p0, a, tf)

    def parameter(self, problem: OCProblem) -> np.ndarray:
        if problem.frozen_a is not None:
            return np.array(problem.frozen_a)
        return self.a


@dataclass
class OCSolution:
    x: Trajectory
    p: Trajectory
    u: Trajectory
    a_star: np.ndarray
    tf: float
    cost: float
    residual_norm: float
    newton_iterations: int
    converged: bool
    hamiltonian_trace: np.ndarray
    report: Optional[SaddleReport] = None
    in_uncertainty_set: bool = True

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


class _ControlSolver:
    """Pointwise ``H_u = 0`` solve, warm-started and reusing its last Jacobian."""

    def __init__(self, problem: OCProblem, u0):
        self.ham = HamiltonianEval(problem)
        self.u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
        self.jac = None

    def __call__(self, x, p, a, t, u_guess=None):
        hu = lambda v: self.ham.H_u(x, v, p, a, t)
        u = self.u if u_guess is None else np.atleast_1d(np.asarray(u_guess, dtype=float))
        r = hu(u)
        prev = np.inf
        for _ in range(CONTROL_MAX_ITER):
            nrm = float(np.abs(r).max())
            if nrm <= CONTROL_TOL or (nrm <= CONTROL_STALL_TOL and nrm > 0.5 * prev):
                self.u = u
                return u
            if self.jac is None or nrm > 0.5 * prev:
                self.jac = fd_jacobian(hu, u, FD_STEP)
            prev = nrm
            try:
                du = np.linalg.solve(self.jac, r)
            except np.linalg.LinAlgError as exc:
                raise ControlSolveFailed(f"singular H_uu at t={t}") from exc
            u = u - du
            r = hu(u)
        raise ControlSolveFailed(f"|H_u| = {np.max(np.abs(r)):.3e} after {CONTROL_MAX_ITER} iterations at t={t}")


def solve_pointwise_control(problem: OCProblem, x, p, a, t, u_guess=None):
    """Control satisfying ``H_u(x, u, p, a, t) = 0`` by Newton from ``u_guess``."""
    guess = np.zeros(problem.r) if u_guess is None else u_guess
    return _ControlSolver(problem, guess)(
        np.atleast_1d(np.asarray(x, dtype=float)),
        np.atleast_1d(np.asarray(p, dtype=float)),
        np.atleast_1d(np.asarray(a, dtype=float)),
        t,
    )


def hamiltonian_rhs(problem: OCProblem, a, t, state, control: Optional[_ControlSolver] = None):
    """``(x', p') = (H_p, -H_x)`` at the pointwise-optimal control."""
    n = problem.n
    x, p = state[:n], state[n:]
    control = control or _ControlSolver(problem, np.zeros(problem.r))
    u = control(x, p, a, t)
    ham = control.ham
    return np.concatenate([ham.H_p(x, u, p, a, t), -ham.H_x(x, u, p, a, t)])


def _tf_clamped(problem: OCProblem, tf_raw: float):
    t0 = problem.boundary.t0
    lo = t0 + 1e-6 * (1.0 + abs(t0))
    return (lo, tf_raw - lo) if tf_raw <= lo else (tf_raw, 0.0)


def _shoot(problem: OCProblem, unk: OCShootingUnknowns, n_nodes: int):
    b = problem.boundary
    if b.free_time:
        tf, penalty = _tf_clamped(problem, unk.tf)
    else:
        tf, penalty = float(b.fixed_tf), 0.0
    grid = TimeGrid(b.t0, tf, n_nodes)
    a = unk.parameter(problem)
    ctl = _ControlSolver(problem, np.zeros(problem.r))
    u_nodes = []
    calls = 0

    def rhs(s, t):
        nonlocal calls
        out = hamiltonian_rhs(problem, a, t, s, ctl)
        if calls % 4 == 0:  # the k1 stage sits exactly on a node
            u_nodes.append(ctl.u)
        calls += 1
        return out

    z = rk4_integrate(rhs, np.concatenate([problem.x0, unk.p0]), grid)
    n = problem.n
    u_nodes.append(ctl(z.values[-1, :n], z.values[-1, n:], a, grid.tf))
    u = np.array(u_nodes)
    return z, u, a, penalty


def _residuals_from(problem: OCProblem, z: Trajectory, u, a, penalty: float) -> np.ndarray:
    n = problem.n
    ham = HamiltonianEval(problem)
    grid = z.grid
    times = grid.times
    if problem.free_param_dim:
        ha = np.array([ham.H_a(z.values[i, :n], u[i], z.values[i, n:], a, times[i]) for i in range(len(times))])
        # the terminal cost of a shifted problem depends on a; integral form of its contribution
        stat = np.atleast_1d(quadrature(ha, grid)) + problem.terminal_a(z.values[-1, :n], a, grid.tf)
    else:
        stat = np.zeros(0)
    xT, pT, uT, tT = z.values[-1, :n], z.values[-1, n:], u[-1], grid.tf
    case = problem.boundary.case
    if isinstance(case, FixedTimeFixedState):
        bnd = xT - np.atleast_1d(case.xf)
    elif isinstance(case, FixedTimeFreeState):
        bnd = problem.terminal_x(xT, a, tT) - pT
    else:
        energy = problem.terminal_t(xT, a, tT) + ham.value(xT, uT, pT, a, tT)
        if isinstance(case, FreeTimeFixedState):
            bnd = np.concatenate([xT - np.atleast_1d(case.xf), [energy]])
        elif isinstance(case, FreeTimeFreeState):
            bnd = np.concatenate([problem.terminal_x(xT, a, tT) - pT, [energy]])
        elif isinstance(case, SurfaceConstrained):
            slope = np.atleast_1d(case.theta_dot(tT))
            bnd = np.concatenate([
                xT - np.atleast_1d(case.theta(tT)),
                [float((problem.terminal_x(xT, a, tT) - pT) @ slope) + energy],
            ])
        else:
            raise InvalidProblem(f"unsupported boundary case {problem.boundary.kind}")
    return np.concatenate([stat, bnd]) + penalty


def assemble_oc_residuals(
    problem: OCProblem, unknowns: OCShootingUnknowns, n_nodes: Optional[int] = None
) -> np.ndarray:
    z, u, a, penalty = _shoot(problem, unknowns, n_nodes or default_n_nodes())
    return _residuals_from(problem, z, u, a, penalty)


def oc_cost(problem: OCProblem, x: np.ndarray, u: np.ndarray, a, grid: TimeGrid) -> float:
    times = grid.times
    run = [problem.running(x[i], u[i], a, times[i]) for i in range(len(times))]
    return problem.terminal(x[-1], a, grid.tf) + quadrature(run, grid)


def _terminal_rate_hessian(problem: OCProblem, x, xdot, a, t, step: float = 0.1) -> np.ndarray:
    """x-Hessian of ``h_x . xdot + h_t`` with ``xdot`` held fixed.

    With analytic terminal partials the rate is differentiated directly.
    Otherwise the rate is the derivative of ``h(x + s xdot, t + s)`` at
    ``s = 0``, so its Hessian is the ``s``-derivative of the Hessian of
    ``h``; this avoids differencing an already finite-differenced gradient.
    The wide ``s`` step is safe because central differences with Richardson
    extrapolation are exact for ``h`` up to degree six.
    """
    if problem.analytic_terminal_partials:
        return fd_hessian(
            lambda xv: float(problem.terminal_x(xv, a, t) @ xdot) + problem.terminal_t(xv, a, t), x
        )
    tau = step * max(1.0, float(np.linalg.norm(x))) / max(1.0, float(np.linalg.norm(np.append(xdot, 1.0))))

    def hess(s):
        return fd_hessian(lambda xv: problem.terminal(xv, a, t + s), x + s * xdot)

    def central(d):
        return (hess(d) - hess(-d)) / (2.0 * d)

    return (4.0 * central(tau / 2.0) - central(tau)) / 3.0


def classify_oc(problem: OCProblem, sol: OCSolution, band: float = SIGN_BAND) -> SaddleReport:
    """Second-order tests on the augmented integrand along a converged solution.

    * ``I_aa``: integral of ``H_aa`` plus the terminal-cost curvature in
      ``a`` (nonzero only for shifted problems).  Along a trajectory with
      ``x' = f`` this equals the integral of ``d2 g_f / da2`` plus the
      initial-term curvature.
    * x-curvature: Hessian of ``g_f`` in ``x`` with ``u``, ``p`` and
      ``x'`` held at their node values.
    * velocity curvature: ``H_uu``.  ``g_f`` is linear in ``x'`` for fixed
      ``u``; the velocity can only vary through the control, so the
      Legendre-Clebsch matrix carries this test.
    """
    ham = HamiltonianEval(problem)
    m = problem.m
    grid = sol.grid
    times = grid.times
    a = sol.a_star
    X, P, U = sol.x.values, sol.p.values, sol.u.values
    gxx_min, gxx_max, gxx_abs = np.inf, -np.inf, 0.0
    huu_min, huu_max = np.inf, -np.inf
    haa = np.zeros((len(times), m, m))
    hu_max = 0.0
    ha_point = np.zeros(len(times))
    for i, t in enumerate(times):
        x, p, u = X[i], P[i], U[i]
        xdot = problem.dynamics(x, u, a, t)

        Hx = fd_hessian(lambda xv: ham.value(xv, u, p, a, t), x) + _terminal_rate_hessian(problem, x, xdot, a, t)
        ev = np.linalg.eigvalsh(0.5 * (Hx + Hx.T))
        gxx_min, gxx_max = min(gxx_min, ev[0]), max(gxx_max, ev[-1])
        gxx_abs = max(gxx_abs, float(np.max(np.abs(Hx))))
        Huu = fd_jacobian(lambda v: ham.H_u(x, v, p, a, t), u, FD_STEP)
        eu = np.linalg.eigvalsh(0.5 * (Huu + Huu.T))
        huu_min, huu_max = min(huu_min, eu[0]), max(huu_max, eu[-1])
        hu_max = max(hu_max, float(np.max(np.abs(ham.H_u(x, u, p, a, t)))))
        if m:
            haa[i] = fd_hessian(lambda av: ham.value(x, u, p, av, t), a)
            ha_point[i] = float(np.max(np.abs(ham.H_a(x, u, p, a, t))))
    I_aa = np.atleast_2d(quadrature(haa, grid)) + problem.terminal_aa(X[-1], a, grid.tf) if m else np.zeros((0, 0))
    linear = bool(gxx_abs < band)
    label = label_from_signs(I_aa, gxx_min, gxx_max, linear, huu_min, huu_max, band)

    z = Trajectory(grid, np.hstack([X, P]))
    first = _residuals_from(problem, z, U, a, 0.0)
    mf = problem.free_param_dim
    conditions = {
        "control_stationarity": hu_max <= 1e-8,
        "stationarity": bool(np.all(np.abs(first[:mf]) <= 1e-8)),
        "boundary": bool(np.all(np.abs(first[mf:]) <= 1e-8)),
        "I_aa_negative_definite": _definite(I_aa, -1, band),
        "g_xx_positive": bool(gxx_min > band),
        "g_xx_zero": linear,
        "H_uu_positive": bool(huu_min > band),
    }
    diagnostics = {
        "max_abs_H_u": hu_max,
        "max_pointwise_H_a": float(ha_point.max()) if m else 0.0,
        "hamiltonian_spread": float(np.ptp(sol.hamiltonian_trace)),
    }
    return SaddleReport(
        I_aa=I_aa,
        min_gxx=float(gxx_min),
        max_gxx=float(gxx_max),
        max_abs_gxx=gxx_abs,
        min_gxdxd=float(huu_min),
        max_gxdxd=float(huu_max),
        linear_in_x=linear,
        classification=label,
        conditions=conditions,
        diagnostics=diagnostics,
    )


def solve_oc(
    problem: OCProblem,
    guess: Optional[OCShootingUnknowns] = None,
    cfg: Optional[NewtonConfig] = None,
    n_nodes: Optional[int] = None,
    classify: bool = True,
) -> OCSolution:
    n_nodes = n_nodes or default_n_nodes()
    guess = guess if guess is not None else OCShootingUnknowns.from_guess(problem)

    shots = {}

    def F(zv):
        shot = _shoot(problem, OCShootingUnknowns.from_vector(problem, zv), n_nodes)
        shots.clear()  # a converged root is the last point evaluated
        shots[zv.tobytes()] = shot
        return _residuals_from(problem, *shot)

    res = newton_solve(F, guess.to_vector(), cfg)
    shot = shots.get(res.root.tobytes())
    if shot is None:
        shot = _shoot(problem, OCShootingUnknowns.from_vector(problem, res.root), n_nodes)
    z, u, a, _ = shot
    grid = z.grid
    n = problem.n
    X, P = z.values[:, :n], z.values[:, n:]
    ham = HamiltonianEval(problem)
    times = grid.times
    trace = np.array([ham.value(X[i], u[i], P[i], a, times[i]) for i in range(n_nodes)])
    sol = OCSolution(
        x=Trajectory(grid, X, "state"),
        p=Trajectory(grid, P, "costate"),
        u=Trajectory(grid, u, "control"),
        a_star=np.array(a, dtype=float),
        tf=grid.tf,
        cost=oc_cost(problem, X, u, a, grid),
        residual_norm=res.residual_norm,
        newton_iterations=res.iterations,
        converged=res.converged,
        hamiltonian_trace=trace,
        in_uncertainty_set=problem.uncertainty.contains(a) if problem.m else True,
    )
    if classify:
        sol.report = classify_oc(problem, sol)
    return sol


def solve_oc_initial_uncertainty(
    problem: OCProblem,
    guess: Optional[OCShootingUnknowns] = None,
    cfg: Optional[NewtonConfig] = None,
    n_nodes: Optional[int] = None,
    classify: bool = True,
) -> OCSolution:
    """Solve a problem with ``x(t0) = x0 + a`` in shifted coordinates, return it in ``x``.

    The costate and control are unchanged by the shift; the state
    trajectory is mapped back with ``x = y + a``.
    """
    shifted = transform_initial_uncertainty(problem)
    sol = solve_oc(shifted, guess, cfg, n_nodes, classify)
    sol.x = Trajectory(sol.grid, shifted.back_map(sol.x.values, sol.a_star), "state")
    return sol
