"""Problem descriptions: integrands, boundary cases, uncertainty sets.

Problems are code-registered evaluators.  Every partial derivative is
optional; missing ones fall back to central differences on the supplied
evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidProblem
from .numerics import fd_gradient, fd_hessian, fd_jacobian

# relative step for first-partial fallbacks: h = max(1e-6, 1e-6*|v|)
FD_STEP = 1e-6
# step for mixed partials taken directly on the integrand value
MIXED_STEP = 1e-4


def _h(v: float) -> float:
    return max(FD_STEP, FD_STEP * abs(v))


# ---------------------------------------------------------------------------
# boundary cases


@dataclass(frozen=True)
class FixedTimeFixedState:
    tf: float
    xf: object


@dataclass(frozen=True)
class FixedTimeFreeState:
    tf: float


@dataclass(frozen=True)
class FreeTimeFixedState:
    xf: object


@dataclass(frozen=True)
class FreeTimeFreeState:
    pass


@dataclass(frozen=True)
class SurfaceConstrained:
    """Terminal state tied to a known curve ``x(tf) = theta(tf)``; tf free."""

    theta: Callable[[float], np.ndarray]
    theta_dot: Callable[[float], np.ndarray]


BoundaryCase = Union[
    FixedTimeFixedState,
    FixedTimeFreeState,
    FreeTimeFixedState,
    FreeTimeFreeState,
    SurfaceConstrained,
]


@dataclass(frozen=True)
class BoundarySpec:
    t0: float
    x0: object
    case: BoundaryCase

    @property
    def free_time(self) -> bool:
        return isinstance(self.case, (FreeTimeFixedState, FreeTimeFreeState, SurfaceConstrained))

    @property
    def fixed_state(self) -> bool:
        return isinstance(self.case, (FixedTimeFixedState, FreeTimeFixedState))

    @property
    def fixed_tf(self) -> Optional[float]:
        return getattr(self.case, "tf", None)

    @property
    def xf(self):
        return getattr(self.case, "xf", None)

    @property
    def kind(self) -> str:
        return type(self.case).__name__


# ---------------------------------------------------------------------------
# uncertainty sets


@dataclass(frozen=True)
class Unbounded:
    dim: int = 1

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("dim must be >= 0")

    def contains(self, a) -> bool:
        return True


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise InvalidProblem("lo and hi must have the same length")
        if any(not l < h for l, h in zip(lo, hi)):
            raise InvalidProblem(f"Box requires lo < hi componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, a, tol: float = 0.0) -> bool:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return bool(np.all(a >= np.array(self.lo) - tol) and np.all(a <= np.array(self.hi) + tol))


UncertaintySet = Union[Unbounded, Box]


# ---------------------------------------------------------------------------
# variational integrands

_PARTIALS = ("g_x", "g_xdot", "g_a", "g_xx", "g_xdot_xdot", "g_aa", "g_xdot_x", "g_xdot_t")


@dataclass(frozen=True)
class IntegrandDef:
    """Scalar integrand ``g(x, xdot, a, t)`` with optional analytic partials.

    ``x`` and ``xdot`` are scalars (the Euler-Lagrange route is scalar in
    the state); ``a`` is a vector of length m.  ``g_a`` returns shape
    ``(m,)`` and ``g_aa`` shape ``(m, m)``.
    """

    eval: Callable
    g_x: Optional[Callable] = None
    g_xdot: Optional[Callable] = None
    g_a: Optional[Callable] = None
    g_xx: Optional[Callable] = None
    g_xdot_xdot: Optional[Callable] = None
    g_aa: Optional[Callable] = None
    g_xdot_x: Optional[Callable] = None
    g_xdot_t: Optional[Callable] = None

    @property
    def analytic(self) -> dict:
        return {name: getattr(self, name) is not None for name in _PARTIALS}

    def value(self, x, xd, a, t) -> float:
        return float(self.eval(x, xd, np.atleast_1d(a), t))

    # first partials ------------------------------------------------------
    def dx(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_x is not None:
            return float(self.g_x(x, xd, a, t))
        h = _h(x)
        return (self.eval(x + h, xd, a, t) - self.eval(x - h, xd, a, t)) / (2 * h)

    def dxdot(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_xdot is not None:
            return float(self.g_xdot(x, xd, a, t))
        h = _h(xd)
        return (self.eval(x, xd + h, a, t) - self.eval(x, xd - h, a, t)) / (2 * h)

    def da(self, x, xd, a, t) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if self.g_a is not None:
            return np.atleast_1d(np.asarray(self.g_a(x, xd, a, t), dtype=float))
        if a.size == 0:
            return np.zeros(0)
        return fd_gradient(lambda z: self.eval(x, xd, z, t), a, FD_STEP)

    # second partials -----------------------------------------------------
    def dxx(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_xx is not None:
            return float(self.g_xx(x, xd, a, t))
        if self.g_x is not None:
            h = _h(x)
            return (self.g_x(x + h, xd, a, t) - self.g_x(x - h, xd, a, t)) / (2 * h)
        return float(fd_hessian(lambda z: self.eval(z[0], xd, a, t), [x])[0, 0])

    def dxdotxdot(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_xdot_xdot is not None:
            return float(self.g_xdot_xdot(x, xd, a, t))
        if self.g_xdot is not None:
            h = _h(xd)
            return (self.g_xdot(x, xd + h, a, t) - self.g_xdot(x, xd - h, a, t)) / (2 * h)
        return float(fd_hessian(lambda z: self.eval(x, z[0], a, t), [xd])[0, 0])

    def daa(self, x, xd, a, t) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if self.g_aa is not None:
            return np.atleast_2d(np.asarray(self.g_aa(x, xd, a, t), dtype=float))
        if a.size == 0:
            return np.zeros((0, 0))
        if self.g_a is not None:
            return fd_jacobian(lambda z: np.atleast_1d(self.g_a(x, xd, z, t)), a, FD_STEP)
        return fd_hessian(lambda z: self.eval(x, xd, z, t), a)

    def dxdotx(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_xdot_x is not None:
            return float(self.g_xdot_x(x, xd, a, t))
        if self.g_xdot is not None:
            h = _h(x)
            return (self.g_xdot(x + h, xd, a, t) - self.g_xdot(x - h, xd, a, t)) / (2 * h)
        hx, hv = MIXED_STEP * max(1, abs(x)), MIXED_STEP * max(1, abs(xd))
        g = self.eval
        return (
            g(x + hx, xd + hv, a, t) - g(x + hx, xd - hv, a, t)
            - g(x - hx, xd + hv, a, t) + g(x - hx, xd - hv, a, t)
        ) / (4 * hx * hv)

    def dxdott(self, x, xd, a, t) -> float:
        a = np.atleast_1d(a)
        if self.g_xdot_t is not None:
            return float(self.g_xdot_t(x, xd, a, t))
        if self.g_xdot is not None:
            h = _h(t)
            return (self.g_xdot(x, xd, a, t + h) - self.g_xdot(x, xd, a, t - h)) / (2 * h)
        ht, hv = MIXED_STEP * max(1, abs(t)), MIXED_STEP * max(1, abs(xd))
        g = self.eval
        return (
            g(x, xd + hv, a, t + ht) - g(x, xd - hv, a, t + ht)
            - g(x, xd + hv, a, t - ht) + g(x, xd - hv, a, t - ht)
        ) / (4 * ht * hv)

    def scaled(self, c: float) -> "IntegrandDef":
        """Integrand ``c * g`` with every supplied partial scaled alike."""

        def wrap(fn):
            if fn is None:
                return None
            return lambda *args: c * np.asarray(fn(*args))

        return IntegrandDef(
            eval=lambda *args: c * self.eval(*args),
            **{name: wrap(getattr(self, name)) for name in _PARTIALS},
        )


@dataclass(frozen=True)
class VariationalProblem:
    integrand: IntegrandDef
    boundary: BoundarySpec
    uncertainty: UncertaintySet = field(default_factory=Unbounded)
    state_dim: int = 1
    name: str = ""
    default_guess: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.state_dim < 1:
            raise InvalidProblem("state_dim must be positive")
        if isinstance(self.boundary.case, SurfaceConstrained):
            raise InvalidProblem("surface-constrained endpoints are only supported for OC problems")

    @property
    def param_dim(self) -> int:
        return self.uncertainty.dim

    def negated(self) -> "VariationalProblem":
        return self.scaled(-1.0)

    def scaled(self, c: float) -> "VariationalProblem":
        return replace(self, integrand=self.integrand.scaled(c))


# ---------------------------------------------------------------------------
# optimal-control problems


def _vec(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass(frozen=True)
class OCProblem:
    """``x' = f(x, u, a, t)``, cost ``h(x(tf), tf) + integral of g(x, u, a, t)``.

    Shapes: x ``(n,)``, u ``(r,)``, a ``(m,)``.  Optional analytic partials
    go in ``partials`` under the keys ``f_x (n,n)``, ``f_u (n,r)``,
    ``f_a (n,m)``, ``g_x (n,)``, ``g_u (r,)``, ``g_a (m,)`` (all taking
    ``(x, u, a, t)``) and ``h_x (n,)``, ``h_t`` (taking ``(x, t)``).

    ``frozen_a`` pins the parameter: the solver then drops the parameter
    unknowns and its stationarity block.
    """

    f: Callable
    g: Callable
    h: Callable
    boundary: BoundarySpec
    uncertainty: UncertaintySet
    n: int
    r: int
    partials: dict = field(default_factory=dict)
    name: str = ""
    default_guess: dict = field(default_factory=dict)
    frozen_a: Optional[tuple] = None
    additive_initial_uncertainty: bool = False

    def __post_init__(self):
        if np.atleast_1d(self.boundary.x0).size != self.n:
            raise InvalidProblem(f"x0 has wrong size for n={self.n}")
        if self.frozen_a is not None:
            fa = tuple(float(v) for v in np.atleast_1d(self.frozen_a))
            if len(fa) != self.m:
                raise InvalidProblem("frozen_a has wrong dimension")
            object.__setattr__(self, "frozen_a", fa)

    @property
    def m(self) -> int:
        return self.uncertainty.dim

    @property
    def free_param_dim(self) -> int:
        return 0 if self.frozen_a is not None else self.m

    @property
    def x0(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.boundary.x0, dtype=float))

    def freeze(self, a) -> "OCProblem":
        return replace(self, frozen_a=tuple(np.atleast_1d(np.asarray(a, dtype=float))))

    # evaluators ------------------------------------------------------------
    def dynamics(self, x, u, a, t) -> np.ndarray:
        return _vec(self.f(x, u, a, t))

    def running(self, x, u, a, t) -> float:
        return float(self.g(x, u, a, t))

    def terminal(self, x, a, t) -> float:
        return float(self.h(x, t))

    def _p(self, key):
        return self.partials.get(key)

    def f_x(self, x, u, a, t):
        fn = self._p("f_x")
        if fn is not None:
            return np.asarray(fn(x, u, a, t), dtype=float).reshape(self.n, self.n)
        return fd_jacobian(lambda z: self.dynamics(z, u, a, t), x, FD_STEP)

    def f_u(self, x, u, a, t):
        fn = self._p("f_u")
        if fn is not None:
            return np.asarray(fn(x, u, a, t), dtype=float).reshape(self.n, self.r)
        return fd_jacobian(lambda z: self.dynamics(x, z, a, t), u, FD_STEP)

    def f_a(self, x, u, a, t):
        if self.m == 0:
            return np.zeros((self.n, 0))
        fn = self._p("f_a")
        if fn is not None:
            return np.asarray(fn(x, u, a, t), dtype=float).reshape(self.n, self.m)
        return fd_jacobian(lambda z: self.dynamics(x, u, z, t), a, FD_STEP)

    def g_x(self, x, u, a, t):
        fn = self._p("g_x")
        if fn is not None:
            return _vec(fn(x, u, a, t))
        return fd_gradient(lambda z: self.running(z, u, a, t), x, FD_STEP)

    def g_u(self, x, u, a, t):
        fn = self._p("g_u")
        if fn is not None:
            return _vec(fn(x, u, a, t))
        return fd_gradient(lambda z: self.running(x, z, a, t), u, FD_STEP)

    def g_a(self, x, u, a, t):
        if self.m == 0:
            return np.zeros(0)
        fn = self._p("g_a")
        if fn is not None:
            return _vec(fn(x, u, a, t))
        return fd_gradient(lambda z: self.running(x, u, z, t), a, FD_STEP)

    def terminal_x(self, x, a, t):
        fn = self._p("h_x")
        if fn is not None:
            return np.atleast_1d(np.asarray(fn(x, t), dtype=float))
        return fd_gradient(lambda z: self.terminal(z, a, t), x, FD_STEP)

    def terminal_t(self, x, a, t) -> float:
        fn = self._p("h_t")
        if fn is not None:
            return float(fn(x, t))
        step = _h(t)
        return (self.terminal(x, a, t + step) - self.terminal(x, a, t - step)) / (2 * step)

    @property
    def analytic_terminal_partials(self) -> bool:
        return "h_x" in self.partials and "h_t" in self.partials

    def terminal_a(self, x, a, t) -> np.ndarray:
        return np.zeros(self.m)

    def terminal_aa(self, x, a, t) -> np.ndarray:
        return np.zeros((self.m, self.m))


@dataclass(frozen=True)
class TransformedOCProblem(OCProblem):
    """Problem in shifted coordinates ``y = x - a`` (known initial state).

    ``f``, ``g`` are the shifted evaluators ``f1(y,u,a,t) = f(y+a,u,t)``,
    ``g1(y,u,a,t) = g(y+a,u,a,t)``; the terminal cost is
    ``h1(y,a,t) = h(y+a,t)`` and therefore depends on ``a``.
    """

    original: Optional[OCProblem] = None

    def f1(self, y, u, a, t):
        return self.dynamics(y, u, a, t)

    def g1(self, y, u, a, t):
        return self.running(y, u, a, t)

    def h1(self, y, a, t):
        return self.terminal(y, a, t)

    def terminal(self, y, a, t) -> float:
        return float(self.original.h(np.asarray(y) + np.asarray(a), t))

    def terminal_x(self, y, a, t):
        return self.original.terminal_x(np.asarray(y) + np.asarray(a), a, t)

    def terminal_t(self, y, a, t) -> float:
        return self.original.terminal_t(np.asarray(y) + np.asarray(a), a, t)

    @property
    def analytic_terminal_partials(self) -> bool:
        return self.original.analytic_terminal_partials

    def terminal_a(self, y, a, t) -> np.ndarray:
        # h1 depends on a only through y + a
        return self.terminal_x(y, a, t)

    def terminal_aa(self, y, a, t) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return fd_hessian(lambda z: self.terminal(y, z, t), a)

    def initial_term(self, a) -> float:
        """``h1(y(t0), a, t0)``, the parameter-dependent constant in the cost."""
        return self.terminal(self.x0, a, self.boundary.t0)

    def back_map(self, y_values, a) -> np.ndarray:
        return np.asarray(y_values, dtype=float) + np.atleast_1d(np.asarray(a, dtype=float))


def transform_initial_uncertainty(p: OCProblem, n_probe: int = 8, seed: int = 0) -> TransformedOCProblem:
    """Shift a problem with ``x(t0) = x0 + a`` to coordinates where ``y(t0) = x0``.

    The dynamics must not depend on ``a`` (checked by sampling); the running
    cost may.
    """
    if not p.additive_initial_uncertainty:
        raise InvalidProblem(f"problem {p.name!r} does not declare additive initial uncertainty")
    if p.m != p.n:
        raise InvalidProblem("additive initial uncertainty needs m == n")
    rng = np.random.default_rng(seed)
    for _ in range(n_probe):
        x = rng.normal(size=p.n)
        u = rng.normal(size=p.r)
        t = p.boundary.t0 + rng.random()
        a1, a2 = rng.normal(size=p.m), rng.normal(size=p.m)
        if not np.allclose(p.dynamics(x, u, a1, t), p.dynamics(x, u, a2, t), rtol=0, atol=1e-12):
            raise InvalidProblem("dynamics depend on a; cannot apply the initial-state transform")

    def f1(y, u, a, t):
        return p.f(np.asarray(y) + a, u, a, t)

    def g1(y, u, a, t):
        return p.g(np.asarray(y) + a, u, a, t)

    parts = {}
    shift = lambda fn: (lambda y, u, a, t: fn(np.asarray(y) + a, u, a, t))
    # analytic partials are wrapped directly; the accessors only add FD fallbacks
    raw = lambda key: p.partials.get(key) or getattr(p, key)
    parts["f_x"] = shift(raw("f_x"))
    parts["f_u"] = shift(raw("f_u"))
    parts["f_a"] = shift(raw("f_x"))
    parts["g_x"] = shift(raw("g_x"))
    parts["g_u"] = shift(raw("g_u"))
    parts["g_a"] = lambda y, u, a, t: p.g_x(np.asarray(y) + a, u, a, t) + p.g_a(np.asarray(y) + a, u, a, t)

    return TransformedOCProblem(
        f=f1,
        g=g1,
        h=p.h,
        boundary=p.boundary,
        uncertainty=p.uncertainty,
        n=p.n,
        r=p.r,
        partials=parts,
        name=f"{p.name}[shifted]" if p.name else "shifted",
        default_guess=dict(p.default_guess),
        frozen_a=p.frozen_a,
        additive_initial_uncertainty=False,
        original=p,
    )


# ---------------------------------------------------------------------------
# built-in registry


def _ex12_integrand() -> IntegrandDef:
    return IntegrandDef(
        eval=lambda x, xd, a, t: x**2 + xd**2 - a[0] ** 2 - 2 * a[0] * x,
        g_x=lambda x, xd, a, t: 2 * x - 2 * a[0],
        g_xdot=lambda x, xd, a, t: 2 * xd,
        g_a=lambda x, xd, a, t: np.array([-2 * a[0] - 2 * x]),
        g_xx=lambda x, xd, a, t: 2.0,
        g_xdot_xdot=lambda x, xd, a, t: 2.0,
        g_aa=lambda x, xd, a, t: np.array([[-2.0]]),
        g_xdot_x=lambda x, xd, a, t: 0.0,
        g_xdot_t=lambda x, xd, a, t: 0.0,
    )


def _ex34_integrand(c_quad: float) -> IntegrandDef:
    # c_quad multiplies a^2 t^2: 9/2 in the free-time example, 18 in the free-time-and-state one
    def g(x, xd, a, t):
        a = a[0]
        return (
            6 * a * x + 0.5 * xd**2 + 4 - 24 * t - 6 * a**2 * t + 12 * a * t + 2 * a
            + c_quad * a**2 * t**2
        )

    return IntegrandDef(
        eval=g,
        g_x=lambda x, xd, a, t: 6 * a[0],
        g_xdot=lambda x, xd, a, t: xd,
        g_a=lambda x, xd, a, t: np.array(
            [6 * x - 12 * a[0] * t + 12 * t + 2 + 2 * c_quad * a[0] * t**2]
        ),
        g_xx=lambda x, xd, a, t: 0.0,
        g_xdot_xdot=lambda x, xd, a, t: 1.0,
        g_aa=lambda x, xd, a, t: np.array([[-12 * t + 2 * c_quad * t**2]]),
        g_xdot_x=lambda x, xd, a, t: 0.0,
        g_xdot_t=lambda x, xd, a, t: 0.0,
    )


def _ex5(uncertainty: UncertaintySet, name: str) -> OCProblem:
    def f(x, u, a, t):
        return np.array([x[1] + a[0] ** 2 + 2 * a[0], -x[1] + u[0]])

    parts = {
        "f_x": lambda x, u, a, t: np.array([[0.0, 1.0], [0.0, -1.0]]),
        "f_u": lambda x, u, a, t: np.array([[0.0], [1.0]]),
        "f_a": lambda x, u, a, t: np.array([[2 * a[0] + 2], [0.0]]),
        "g_x": lambda x, u, a, t: np.zeros(2),
        "g_u": lambda x, u, a, t: np.array([u[0]]),
        "g_a": lambda x, u, a, t: np.array([-40 * a[0] ** 3]),
        "h_x": lambda x, t: np.asarray(x, dtype=float),
        "h_t": lambda x, t: 0.0,
    }
    return OCProblem(
        f=f,
        g=lambda x, u, a, t: 0.5 * u[0] ** 2 - 10 * a[0] ** 4,
        h=lambda x, t: 0.5 * (x[0] ** 2 + x[1] ** 2),
        boundary=BoundarySpec(0.0, (1.0, 1.0), FixedTimeFreeState(2.0)),
        uncertainty=uncertainty,
        n=2,
        r=1,
        partials=parts,
        name=name,
        default_guess={"p0": (3.0, 3.0), "a": (0.6,)},
    )


def _lq_initial(reward: float, name: str) -> OCProblem:
    """x' = u, x(0) = 0 + a, J = x(1)^2/2 + integral of (u^2/2 - reward*a^2)."""
    return OCProblem(
        f=lambda x, u, a, t: np.array([u[0]]),
        g=lambda x, u, a, t: 0.5 * u[0] ** 2 - reward * a[0] ** 2,
        h=lambda x, t: 0.5 * x[0] ** 2,
        boundary=BoundarySpec(0.0, (0.0,), FixedTimeFreeState(1.0)),
        uncertainty=Unbounded(1),
        n=1,
        r=1,
        partials={
            "f_x": lambda x, u, a, t: np.array([[0.0]]),
            "f_u": lambda x, u, a, t: np.array([[1.0]]),
            "f_a": lambda x, u, a, t: np.array([[0.0]]),
            "g_x": lambda x, u, a, t: np.zeros(1),
            "g_u": lambda x, u, a, t: np.array([u[0]]),
            "g_a": lambda x, u, a, t: np.array([-2 * reward * a[0]]),
            "h_x": lambda x, t: np.asarray(x, dtype=float),
            "h_t": lambda x, t: 0.0,
        },
        name=name,
        default_guess={"p0": (0.3,), "a": (0.4,)},
        additive_initial_uncertainty=True,
    )


def register_builtin_examples() -> dict:
    """Name -> problem map of the built-in worked examples.

    ``ex5`` is the box-bounded variant of the two-state example and
    ``ex5u`` the unbounded one.  ``lq-init`` and ``lq-init-concave`` are
    scalar problems with an uncertain initial state.
    """
    reg = {
        "ex1": VariationalProblem(
            _ex12_integrand(),
            BoundarySpec(0.0, 1.0, FixedTimeFixedState(1.0, 1.0)),
            Unbounded(1),
            name="ex1",
            default_guess={"xdot0": 0.0, "a": (0.0,)},
        ),
        "ex2": VariationalProblem(
            _ex12_integrand(),
            BoundarySpec(0.0, 0.0, FixedTimeFreeState(1.0)),
            Unbounded(1),
            name="ex2",
            default_guess={"xdot0": 0.5, "a": (0.5,)},
        ),
        "ex3": VariationalProblem(
            _ex34_integrand(4.5),
            BoundarySpec(0.0, 0.0, FreeTimeFixedState(0.0)),
            Unbounded(1),
            name="ex3",
            default_guess={"xdot0": -1.0, "a": (1.5,), "tf": 0.5},
        ),
        "ex4": VariationalProblem(
            _ex34_integrand(18.0),
            BoundarySpec(0.0, 0.0, FreeTimeFreeState()),
            Unbounded(1),
            name="ex4",
            default_guess={"xdot0": -4.0, "a": (1.5,), "tf": 0.3},
        ),
        "ex5": _ex5(Box((-0.5,), (0.5,)), "ex5"),
        "ex5u": _ex5(Unbounded(1), "ex5u"),
        "lq-init": _lq_initial(0.0, "lq-init"),
        "lq-init-concave": _lq_initial(1.0, "lq-init-concave"),
    }
    return reg


_REGISTRY: Optional[dict] = None


def registry() -> dict:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = register_builtin_examples()
    return _REGISTRY


def lookup(name: str, reg: Optional[dict] = None):
    from .errors import ProblemNotFound

    reg = registry() if reg is None else reg
    try:
        return reg[name]
    except KeyError:
        raise ProblemNotFound(
            f"unknown problem {name!r}; valid keys: {', '.join(sorted(reg))}"
        ) from None
