"""Numerical kernel shared by both saddle solvers.

Fixed-step RK4 on a uniform grid, composite quadrature on the same nodes,
central finite differences and a damped Newton root finder.  Everything in
here is a pure function of its inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import IntegrationDiverged, NonFiniteEvaluation, SingularJacobian

DEFAULT_N_NODES = 1001


def default_n_nodes() -> int:
    """Grid size used when a caller passes none; ``VARIMAX_N_NODES`` overrides."""
    raw = os.environ.get("VARIMAX_N_NODES")
    return int(raw) if raw else DEFAULT_N_NODES


ROLES = ("state", "costate", "control", "shifted-state", "generic")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_nodes`` points on ``[t0, tf]``."""

    t0: float
    tf: float
    n_nodes: int

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not self.tf > self.t0:
            raise ValueError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")

    @property
    def spacing(self) -> float:
        return (self.tf - self.t0) / (self.n_nodes - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_nodes)


@dataclass
class Trajectory:
    """Per-node vector samples of one signal on a :class:`TimeGrid`.

    ``values`` has shape ``(n_nodes, dim)``.
    """

    grid: TimeGrid
    values: np.ndarray
    role: str = "generic"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"trajectory has {v.shape[0]} rows, grid has {self.grid.n_nodes} nodes"
            )
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        self.values = v

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def component(self, k: int = 0) -> np.ndarray:
        return self.values[:, k]

    def derivative(self) -> np.ndarray:
        """Second-order finite-difference time derivative at every node."""
        return np.gradient(self.values, self.grid.spacing, axis=0, edge_order=2)

    def final(self) -> np.ndarray:
        return self.values[-1].copy()


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 100
    damping: Sequence[float] = (1.0, 0.5, 0.25, 0.125, 0.0625)
    fd_step: float = 1e-7
    max_condition: float = 1e14

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class NewtonResult(NamedTuple):
    root: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def rk4_integrate(
    rhs: Callable[[np.ndarray, float], np.ndarray],
    x_init,
    grid: TimeGrid,
    role: str = "generic",
) -> Trajectory:
    """Classical fixed-step Runge-Kutta integration of ``x' = rhs(x, t)``."""
    x = np.atleast_1d(np.asarray(x_init, dtype=float)).copy()
    t = grid.times
    h = grid.spacing
    out = np.empty((grid.n_nodes, x.size))
    out[0] = x

    shape = x.shape
    isfinite = np.isfinite

    def _f(state, tau, node):
        d = np.asarray(rhs(state, tau), dtype=float).reshape(shape)
        if not isfinite(d).all():
            raise IntegrationDiverged(node)
        return d

    for i in range(grid.n_nodes - 1):
        ti = t[i]
        k1 = _f(x, ti, i)
        k2 = _f(x + 0.5 * h * k1, ti + 0.5 * h, i)
        k3 = _f(x + 0.5 * h * k2, ti + 0.5 * h, i)
        k4 = _f(x + h * k3, ti + h, i)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not isfinite(x).all():
            raise IntegrationDiverged(i + 1)
        out[i + 1] = x
    return Trajectory(grid, out, role)


def quadrature_weights(n_nodes: int, spacing: float) -> np.ndarray:
    """Composite Simpson weights for odd ``n_nodes``, trapezoid otherwise."""
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    w = np.ones(n_nodes)
    if n_nodes % 2 == 1 and n_nodes >= 3:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * spacing / 3.0
    w[0] = w[-1] = 0.5
    return w * spacing


def quadrature(samples, grid: TimeGrid) -> float | np.ndarray:
    """Integrate node samples over the grid.

    ``samples`` may carry trailing dimensions (vector or matrix integrands);
    the leading axis must match the node count.
    """
    s = np.asarray(samples, dtype=float)
    if s.shape[0] != grid.n_nodes:
        raise ValueError(f"got {s.shape[0]} samples for {grid.n_nodes} nodes")
    w = quadrature_weights(grid.n_nodes, grid.spacing)
    out = np.tensordot(w, s, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def _steps(z: np.ndarray, step: float) -> np.ndarray:
    return step * np.maximum(1.0, np.abs(z))


def _checked(value, where: str):
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteEvaluation(f"non-finite value at {where}")
    return v


def fd_gradient(f: Callable[[np.ndarray], float], z, step: float = 1e-7) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    hs = _steps(z, step)
    g = np.empty_like(z)
    for i, h in enumerate(hs):
        e = np.zeros_like(z)
        e[i] = h
        fp = _checked(f(z + e), f"z+h e{i}")
        fm = _checked(f(z - e), f"z-h e{i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def fd_jacobian(F: Callable[[np.ndarray], np.ndarray], z, step: float = 1e-7) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    hs = _steps(z, step)
    cols = []
    for i, h in enumerate(hs):
        e = np.zeros_like(z)
        e[i] = h
        fp = np.atleast_1d(_checked(F(z + e), f"z+h e{i}"))
        fm = np.atleast_1d(_checked(F(z - e), f"z-h e{i}"))
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def fd_hessian(f: Callable[[np.ndarray], float], z, step: float = 1e-2) -> np.ndarray:
    """Curvature of a scalar function by Richardson-extrapolated second differences.

    The wide default step keeps rounding noise near 1e-12 relative; the
    extrapolation makes the result exact for polynomials up to degree five.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = z.size
    base = _steps(z, step)
    f0 = float(_checked(f(z), "z"))

    def at(h):
        H = np.empty((n, n))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h[i]
            H[i, i] = (float(f(z + ei)) - 2.0 * f0 + float(f(z - ei))) / h[i] ** 2
            for j in range(i):
                ej = np.zeros(n)
                ej[j] = h[j]
                H[i, j] = H[j, i] = (
                    float(f(z + ei + ej)) - float(f(z + ei - ej))
                    - float(f(z - ei + ej)) + float(f(z - ei - ej))
                ) / (4.0 * h[i] * h[j])
        return H

    H = (4.0 * at(base / 2.0) - at(base)) / 3.0
    return _checked(H, "hessian")


def newton_solve(
    F: Callable[[np.ndarray], np.ndarray],
    z0,
    cfg: Optional[NewtonConfig] = None,
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> NewtonResult:
    """Damped Newton iteration on ``F(z) = 0``.

    Each step takes the largest damping factor that strictly lowers the
    max-norm of the residual.  When no factor helps, or ``max_iter`` is hit,
    the best iterate is returned with ``converged=False``.
    """
    cfg = cfg or NewtonConfig()
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()

    def norm_at(point):
        try:
            r = np.atleast_1d(np.asarray(F(point), dtype=float))
        except (IntegrationDiverged, NonFiniteEvaluation, FloatingPointError):
            return None, np.inf
        if not np.all(np.isfinite(r)):
            return None, np.inf
        return r, float(np.max(np.abs(r))) if r.size else 0.0

    r, nrm = norm_at(z)
    if r is None:
        raise NonFiniteEvaluation("residual is not finite at the initial guess")
    if nrm <= cfg.tol:
        return NewtonResult(z, nrm, 0, True)

    for it in range(1, cfg.max_iter + 1):
        J = jacobian(z) if jacobian is not None else fd_jacobian(F, z, cfg.fd_step)
        J = np.atleast_2d(J)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > cfg.max_condition:
            raise SingularJacobian(float(cond))
        dz = np.linalg.solve(J, -r)
        for lam in cfg.damping:
            trial = z + lam * dz
            rt, nt = norm_at(trial)
            if nt < nrm:
                z, r, nrm = trial, rt, nt
                break
        else:
            return NewtonResult(z, nrm, it, nrm <= cfg.tol)
        if nrm <= cfg.tol:
            return NewtonResult(z, nrm, it, True)
    return NewtonResult(z, nrm, cfg.max_iter, False)
