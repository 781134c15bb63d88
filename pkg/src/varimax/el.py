"""Shooting solver for min-max variational problems with a constant parameter.

Unknowns are the initial slope, the parameter vector and (for free-time
cases) the final time.  The residual stacks parameter stationarity
``integral of g_a dt`` first, then the boundary or transversality block
of the active case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DegenerateIntegrand, InvalidProblem, VarimaxError
from .numerics import (
    NewtonConfig,
    TimeGrid,
    Trajectory,
    default_n_nodes,
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
    VariationalProblem,
)

SIGN_BAND = 1e-9


class Classification(str, enum.Enum):
    MIN_MAX = "min-max"
    MAX_MIN = "max-min"
    MIN_MIN = "min-min"
    MAX_MAX = "max-max"
    INDETERMINATE = "indeterminate"


@dataclass
class ShootingUnknowns:
    xdot0: float
    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tf: Optional[float] = None

    def __post_init__(self):
        self.xdot0 = float(self.xdot0)
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.tf is not None:
            self.tf = float(self.tf)

    def to_vector(self) -> np.ndarray:
        tail = [] if self.tf is None else [self.tf]
        return np.concatenate([[self.xdot0], self.a, tail])

    @classmethod
    def from_vector(cls, problem: VariationalProblem, z) -> "ShootingUnknowns":
        z = np.asarray(z, dtype=float)
        m = problem.param_dim
        expected = 1 + m + (1 if problem.boundary.free_time else 0)
        if z.size != expected:
            raise ValueError(f"expected {expected} unknowns, got {z.size}")
        tf = z[1 + m] if problem.boundary.free_time else None
        return cls(z[0], z[1 : 1 + m], tf)

    @classmethod
    def from_guess(cls, problem: VariationalProblem, guess: Optional[dict] = None) -> "ShootingUnknowns":
        g = dict(problem.default_guess)
        g.update(guess or {})
        m = problem.param_dim
        a = np.atleast_1d(np.asarray(g.get("a", np.zeros(m)), dtype=float))
        if a.size != m:
            raise ValueError(f"guess for a has {a.size} components, problem has m={m}")
        tf = None
        if problem.boundary.free_time:
            tf = float(g.get("tf", problem.boundary.t0 + 1.0))
        return cls(float(g.get("xdot0", 0.0)), a, tf)


@dataclass
class SaddleReport:
    I_aa: np.ndarray
    min_gxx: float
    max_gxx: float
    max_abs_gxx: float
    min_gxdxd: float
    max_gxdxd: float
    linear_in_x: bool
    classification: Classification
    conditions: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ELSolution:
    x: Trajectory
    xdot: Trajectory
    a_star: np.ndarray
    tf: float
    cost: float
    residual_norm: float
    newton_iterations: int
    converged: bool
    report: Optional[SaddleReport] = None

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


# ---------------------------------------------------------------------------
# first-order machinery


def el_rhs(problem: VariationalProblem, a, t: float, state) -> np.ndarray:
    """``(x', x'')`` with ``x''`` solved from the expanded Euler-Lagrange equation."""
    x, xd = float(state[0]), float(state[1])
    ig = problem.integrand
    gvv = ig.dxdotxdot(x, xd, a, t)
    if abs(gvv) < 1e-12:
        raise DegenerateIntegrand(f"g_xdot_xdot = {gvv:.3e} at t={t}; EL equation not solvable for x''")
    xdd = (ig.dx(x, xd, a, t) - ig.dxdotx(x, xd, a, t) * xd - ig.dxdott(x, xd, a, t)) / gvv
    return np.array([xd, xdd])


def _tf_clamped(problem: VariationalProblem, tf_raw: float) -> tuple[float, float]:
    t0 = problem.boundary.t0
    lo = t0 + 1e-6 * (1.0 + abs(t0))
    if tf_raw <= lo:
        return lo, tf_raw - lo
    return tf_raw, 0.0


def _check_el(problem: VariationalProblem):
    if problem.state_dim != 1:
        raise InvalidProblem("the Euler-Lagrange route handles scalar states only; use the OC solver")


def _shoot(problem: VariationalProblem, u: ShootingUnknowns, n_nodes: int):
    b = problem.boundary
    if b.free_time:
        tf, penalty = _tf_clamped(problem, u.tf)
    else:
        tf, penalty = float(b.fixed_tf), 0.0
    grid = TimeGrid(b.t0, tf, n_nodes)
    a = u.a
    traj = rk4_integrate(lambda s, t: el_rhs(problem, a, t, s), [float(b.x0), u.xdot0], grid)
    return traj, penalty


def _node_values(problem, traj: Trajectory, a, fn) -> np.ndarray:
    t = traj.times
    return np.array([fn(traj.values[i, 0], traj.values[i, 1], a, t[i]) for i in range(len(t))])


def _residuals_from(problem, traj: Trajectory, a, penalty: float) -> np.ndarray:
    ig = problem.integrand
    b = problem.boundary
    if problem.param_dim:
        stat = np.atleast_1d(quadrature(_node_values(problem, traj, a, ig.da), traj.grid))
    else:
        stat = np.zeros(0)
    xT, vT = traj.values[-1]
    tT = traj.grid.tf
    case = b.case
    if isinstance(case, FixedTimeFixedState):
        bnd = [xT - float(case.xf)]
    elif isinstance(case, FixedTimeFreeState):
        bnd = [ig.dxdot(xT, vT, a, tT)]
    elif isinstance(case, FreeTimeFixedState):
        bnd = [xT - float(case.xf), ig.value(xT, vT, a, tT) - ig.dxdot(xT, vT, a, tT) * vT]
    elif isinstance(case, FreeTimeFreeState):
        bnd = [ig.dxdot(xT, vT, a, tT), ig.value(xT, vT, a, tT)]
    else:
        raise InvalidProblem(f"unsupported boundary case {b.kind}")
    r = np.concatenate([stat, bnd])
    return r + penalty


def assemble_el_residuals(
    problem: VariationalProblem, unknowns: ShootingUnknowns, n_nodes: Optional[int] = None
) -> np.ndarray:
    _check_el(problem)
    traj, penalty = _shoot(problem, unknowns, n_nodes or default_n_nodes())
    return _residuals_from(problem, traj, unknowns.a, penalty)


def functional_value(problem: VariationalProblem, x, xdot, a, grid: TimeGrid) -> float:
    ig = problem.integrand
    t = grid.times
    return quadrature([ig.value(x[i], xdot[i], a, t[i]) for i in range(len(t))], grid)


def solve_el(
    problem: VariationalProblem,
    guess: Optional[ShootingUnknowns] = None,
    cfg: Optional[NewtonConfig] = None,
    n_nodes: Optional[int] = None,
) -> ELSolution:
    _check_el(problem)
    n_nodes = n_nodes or default_n_nodes()
    guess = guess if guess is not None else ShootingUnknowns.from_guess(problem)
    if guess.a.size != problem.param_dim or (guess.tf is None) == problem.boundary.free_time:
        raise ValueError("guess does not match the problem's boundary case / parameter dimension")

    def F(z):
        return assemble_el_residuals(problem, ShootingUnknowns.from_vector(problem, z), n_nodes)

    res = newton_solve(F, guess.to_vector(), cfg)
    u = ShootingUnknowns.from_vector(problem, res.root)
    traj, _ = _shoot(problem, u, n_nodes)
    grid = traj.grid
    x = Trajectory(grid, traj.values[:, 0], "state")
    xd = Trajectory(grid, traj.values[:, 1], "generic")
    sol = ELSolution(
        x=x,
        xdot=xd,
        a_star=u.a,
        tf=grid.tf,
        cost=functional_value(problem, x.component(), xd.component(), u.a, grid),
        residual_norm=res.residual_norm,
        newton_iterations=res.iterations,
        converged=res.converged,
    )
    sol.report = classify_saddle(problem, sol)
    return sol


def el_pointwise_residual(problem: VariationalProblem, sol: ELSolution) -> np.ndarray:
    """``g_x - d/dt g_xdot`` at every node, the time derivative by finite differences."""
    ig = problem.integrand
    t = sol.grid.times
    x, v = sol.x.component(), sol.xdot.component()
    gx = np.array([ig.dx(x[i], v[i], sol.a_star, t[i]) for i in range(len(t))])
    gv = np.array([ig.dxdot(x[i], v[i], sol.a_star, t[i]) for i in range(len(t))])
    return gx - np.gradient(gv, sol.grid.spacing, edge_order=2)


# ---------------------------------------------------------------------------
# second-order classification


def _definite(M: np.ndarray, sign: int, band: float) -> bool:
    if M.size == 0:
        return True
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    return bool(np.all(sign * eig > band))


def label_from_signs(I_aa, min_gxx, max_gxx, linear_in_x, min_gxdxd, max_gxdxd, band=SIGN_BAND):
    I_aa = np.atleast_2d(I_aa) if np.size(I_aa) else np.zeros((0, 0))
    neg = _definite(I_aa, -1, band)
    pos = _definite(I_aa, +1, band)
    if neg and (min_gxx > band or linear_in_x) and min_gxdxd > band:
        return Classification.MIN_MAX
    if neg and max_gxx < -band and max_gxdxd < -band:
        return Classification.MAX_MAX
    if pos and max_gxx < -band and max_gxdxd < -band:
        return Classification.MAX_MIN
    if pos and min_gxx > band and min_gxdxd > band:
        return Classification.MIN_MIN
    return Classification.INDETERMINATE


def classify_saddle(problem: VariationalProblem, sol: ELSolution, band: float = SIGN_BAND) -> SaddleReport:
    ig = problem.integrand
    a = sol.a_star
    t = sol.grid.times
    x, v = sol.x.component(), sol.xdot.component()
    gxx = np.array([ig.dxx(x[i], v[i], a, t[i]) for i in range(len(t))])
    gvv = np.array([ig.dxdotxdot(x[i], v[i], a, t[i]) for i in range(len(t))])
    m = problem.param_dim
    if m:
        gaa = np.array([ig.daa(x[i], v[i], a, t[i]) for i in range(len(t))])
        I_aa = np.atleast_2d(quadrature(gaa, sol.grid))
    else:
        I_aa = np.zeros((0, 0))
    linear = bool(np.max(np.abs(gxx)) < band)
    label = label_from_signs(I_aa, gxx.min(), gxx.max(), linear, gvv.min(), gvv.max(), band)

    traj = Trajectory(sol.grid, np.column_stack([x, v]))
    first = _residuals_from(problem, traj, a, 0.0)
    conditions = {
        "el_equation": bool(np.max(np.abs(el_pointwise_residual(problem, sol))) <= 1e-5),
        "stationarity": bool(np.all(np.abs(first[:m]) <= 1e-8)),
        "boundary": bool(np.all(np.abs(first[m:]) <= 1e-8)),
        "I_aa_negative_definite": _definite(I_aa, -1, band),
        "g_xx_positive": bool(gxx.min() > band),
        "g_xx_zero": linear,
        "g_xdot_xdot_positive": bool(gvv.min() > band),
    }
    return SaddleReport(
        I_aa=I_aa,
        min_gxx=float(gxx.min()),
        max_gxx=float(gxx.max()),
        max_abs_gxx=float(np.max(np.abs(gxx))),
        min_gxdxd=float(gvv.min()),
        max_gxdxd=float(gvv.max()),
        linear_in_x=linear,
        classification=label,
        conditions=conditions,
    )


# ---------------------------------------------------------------------------
# saddle probing


@dataclass
class ProbeReport:
    n_probes: int
    magnitude: float
    violations_x: int
    violations_a: int
    worst_margin: float

    @property
    def violations(self) -> int:
        return self.violations_x + self.violations_a


def _bump(problem: VariationalProblem, s: np.ndarray, k: int):
    """Basis perturbation in normalized time ``s`` and its s-derivative."""
    if problem.boundary.fixed_state:
        w = k * np.pi
    else:
        w = (k - 0.5) * np.pi
    return np.sin(w * s), w * np.cos(w * s)


def saddle_probe(
    problem: VariationalProblem,
    sol: ELSolution,
    n_probes: int = 100,
    magnitude: float = 0.05,
    seed: int = 0,
) -> ProbeReport:
    """Check ``J(x*, a*+da) <= J(x*, a*) <= J(x*+dx, a*)`` on random perturbations.

    ``dx`` vanishes at t0, and at tf when the final state is fixed.  The
    horizon is held at the solution's tf.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng(seed)
    grid = sol.grid
    s = (grid.times - grid.t0) / (grid.tf - grid.t0)
    x, v = sol.x.component(), sol.xdot.component()
    a = sol.a_star
    J0 = functional_value(problem, x, v, a, grid)
    tol = 1e-9 * (1.0 + abs(J0))
    vx = va = 0
    worst = np.inf
    for _ in range(n_probes):
        coef = rng.normal(size=4)
        dx = np.zeros_like(s)
        dds = np.zeros_like(s)
        for k, c in enumerate(coef, start=1):
            b, db = _bump(problem, s, k)
            dx += c * b
            dds += c * db
        scale = magnitude / max(np.max(np.abs(dx)), 1e-300)
        dx *= scale
        dv = dds * scale / (grid.tf - grid.t0)
        margin = functional_value(problem, x + dx, v + dv, a, grid) - J0
        worst = min(worst, margin)
        if margin < -tol:
            vx += 1
        if a.size:
            d = rng.normal(size=a.size)
            d *= magnitude / np.linalg.norm(d)
            margin = J0 - functional_value(problem, x, v, a + d, grid)
            worst = min(worst, margin)
            if margin < -tol:
                va += 1
    return ProbeReport(n_probes, magnitude, vx, va, float(worst))


# ---------------------------------------------------------------------------
# discrete oracle


class OracleNotConverged(VarimaxError):
    pass


@dataclass
class OracleResult:
    a_star: np.ndarray
    J_star: float
    rounds: int
    x: np.ndarray


def _nodal(fn, x, xd, a, t):
    try:
        out = np.asarray(fn(x, xd, a, t), dtype=float)
        if out.shape == x.shape:
            return out
        if out.ndim == 0:
            return np.full(x.shape, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(x[i], xd[i], a, t[i])) for i in range(x.size)])


def oracle_discrete_saddle(
    problem: VariationalProblem,
    n_nodes: int = 201,
    a_guess=None,
    max_rounds: int = 200,
    tol: float = 1e-7,
) -> OracleResult:
    """Brute-force discrete saddle on node values, independent of shooting.

    The trajectory is represented by its node values.  ``x'`` is the central
    difference about each interval midpoint and ``J`` the composite midpoint
    rule; node-centered differences would leave an odd-even mode unpenalized.  Minimization over the
    free nodes (Newton on the discrete gradient) alternates with a
    golden-section maximization over the scalar parameter until ``a``
    moves less than ``tol`` (golden section cannot resolve a flat maximum
    much below 1e-8).
    """
    b = problem.boundary
    if b.free_time:
        raise InvalidProblem("the discrete oracle needs a fixed horizon")
    m = problem.param_dim
    if m > 1:
        raise InvalidProblem("the discrete oracle handles m <= 1")
    ig = problem.integrand
    grid = TimeGrid(b.t0, float(b.fixed_tf), n_nodes)
    h = grid.spacing
    t = grid.times[:-1] + 0.5 * h
    w = np.full(n_nodes - 1, h)
    eye = np.eye(n_nodes)
    D = (eye[1:] - eye[:-1]) / h
    M = 0.5 * (eye[1:] + eye[:-1])
    free = np.ones(n_nodes, dtype=bool)
    free[0] = False
    x_full = np.full(n_nodes, float(b.x0))
    if b.fixed_state:
        free[-1] = False
        x_full = np.linspace(float(b.x0), float(b.xf), n_nodes)

    def full(xf):
        z = x_full.copy()
        z[free] = xf
        return z

    def J(xf, a):
        z = full(xf)
        return float(w @ _nodal(ig.eval, M @ z, D @ z, a, t))

    def dgx(z, zd, a):
        if ig.g_x is not None:
            return _nodal(ig.g_x, z, zd, a, t)
        h = FD_STEP * np.maximum(1.0, np.abs(z))
        return (_nodal(ig.eval, z + h, zd, a, t) - _nodal(ig.eval, z - h, zd, a, t)) / (2 * h)

    def dgv(z, zd, a):
        if ig.g_xdot is not None:
            return _nodal(ig.g_xdot, z, zd, a, t)
        h = FD_STEP * np.maximum(1.0, np.abs(zd))
        return (_nodal(ig.eval, z, zd + h, a, t) - _nodal(ig.eval, z, zd - h, a, t)) / (2 * h)

    def grad(xf, a):
        full_x = full(xf)
        z, zd = M @ full_x, D @ full_x
        gfull = M.T @ (w * dgx(z, zd, a)) + D.T @ (w * dgv(z, zd, a))
        return gfull[free]

    def argmin_x(xf, a):
        res = newton_solve(lambda q: grad(q, a), xf, NewtonConfig(tol=1e-11, max_iter=50))
        return res.root

    xf = x_full[free].copy()
    a = np.atleast_1d(np.asarray(
        a_guess if a_guess is not None else problem.default_guess.get("a", np.zeros(m)), dtype=float
    ))
    if m == 0:
        xf = argmin_x(xf, a)
        return OracleResult(a, J(xf, a), 1, full(xf))

    for rnd in range(1, max_rounds + 1):
        xf = argmin_x(xf, a)
        a0 = float(a[0])
        res = optimize.minimize_scalar(
            lambda q: -J(xf, np.array([q])), bracket=(a0 - 1.0, a0 + 1.0), method="golden",
            tol=1e-12,
        )
        a_new = np.array([float(res.x)])
        step = abs(a_new[0] - a0)
        a = a_new
        if step < tol:
            xf = argmin_x(xf, a)
            return OracleResult(a, J(xf, a), rnd, full(xf))
    raise OracleNotConverged(f"alternation did not settle in {max_rounds} rounds")
