import numpy as np
import pytest

from varimax.errors import InvalidProblem, ProblemNotFound
from varimax.numerics import fd_gradient
from varimax.problems import (
    BoundarySpec,
    Box,
    FixedTimeFixedState,
    FixedTimeFreeState,
    IntegrandDef,
    OCProblem,
    SurfaceConstrained,
    Unbounded,
    VariationalProblem,
    lookup,
    registry,
    transform_initial_uncertainty,
)

EL_NAMES = ["ex1", "ex2", "ex3", "ex4"]


def test_registry_contents():
    reg = registry()
    for key in ["ex1", "ex2", "ex3", "ex4", "ex5", "ex5u"]:
        assert key in reg
    for key in EL_NAMES:
        assert isinstance(reg[key], VariationalProblem)
        assert all(reg[key].integrand.analytic.values())
    assert isinstance(reg["ex5"], OCProblem)
    assert reg["ex5"].uncertainty == Box((-0.5,), (0.5,))
    assert isinstance(reg["ex5u"].uncertainty, Unbounded)


def test_ex1_definition():
    p = lookup("ex1")
    assert isinstance(p.boundary.case, FixedTimeFixedState)
    assert p.boundary.x0 == 1.0 and p.boundary.case.tf == 1.0 and p.boundary.case.xf == 1.0
    x, xd, a = 0.7, -0.3, np.array([1.4])
    assert p.integrand.value(x, xd, a, 0.2) == pytest.approx(x**2 + xd**2 - a[0] ** 2 - 2 * a[0] * x)


def test_unknown_problem_names_valid_keys():
    with pytest.raises(ProblemNotFound) as info:
        lookup("nonexistent")
    assert "ex1" in str(info.value)
    assert isinstance(info.value, KeyError)


@pytest.mark.parametrize("name", EL_NAMES)
def test_analytic_partials_match_fd(name, rng):
    ig = lookup(name).integrand
    raw = IntegrandDef(eval=ig.eval)  # same integrand, every partial by finite differences
    for _ in range(50):
        x, xd, t = rng.uniform(-2, 2, size=3)
        a = rng.uniform(-2, 2, size=1)
        for meth in ("dx", "dxdot", "da", "dxx", "dxdotxdot", "daa", "dxdotx", "dxdott"):
            exact = np.asarray(getattr(ig, meth)(x, xd, a, t), dtype=float)
            approx = np.asarray(getattr(raw, meth)(x, xd, a, t), dtype=float)
            assert np.allclose(exact, approx, atol=1e-6, rtol=1e-6), (meth, x, xd, a, t)


@pytest.mark.parametrize("name", ["ex5u", "lq-init"])
def test_oc_partials_match_fd(name, rng):
    p = lookup(name)
    for _ in range(50):
        x, u, a = rng.normal(size=p.n), rng.normal(size=p.r), rng.normal(size=p.m)
        t = rng.uniform(0, 2)
        assert np.allclose(p.g_x(x, u, a, t), fd_gradient(lambda z: p.running(z, u, a, t), x), atol=1e-6)
        assert np.allclose(p.g_u(x, u, a, t), fd_gradient(lambda z: p.running(x, z, a, t), u), atol=1e-6)
        assert np.allclose(p.g_a(x, u, a, t), fd_gradient(lambda z: p.running(x, u, z, t), a), atol=1e-6)
        for k in range(p.n):
            row = lambda z, k=k: p.dynamics(z, u, a, t)[k]
            assert np.allclose(p.f_x(x, u, a, t)[k], fd_gradient(row, x), atol=1e-6)
            assert np.allclose(p.f_u(x, u, a, t)[k], fd_gradient(lambda z, k=k: p.dynamics(x, z, a, t)[k], u), atol=1e-6)
            assert np.allclose(p.f_a(x, u, a, t)[k], fd_gradient(lambda z, k=k: p.dynamics(x, u, z, t)[k], a), atol=1e-6)
        assert np.allclose(p.terminal_x(x, a, t), fd_gradient(lambda z: p.terminal(z, a, t), x), atol=1e-6)


def test_ex1_second_partials_constant(rng):
    ig = lookup("ex1").integrand
    for x, xd, a, t in rng.uniform(-3, 3, size=(20, 4)):
        assert ig.dxx(x, xd, [a], t) == 2.0
        assert ig.dxdotxdot(x, xd, [a], t) == 2.0
        assert ig.daa(x, xd, [a], t)[0, 0] == -2.0


class TestUncertaintySets:
    def test_box_requires_ordered_bounds(self):
        with pytest.raises(InvalidProblem):
            Box((1.0,), (0.5,))
        with pytest.raises(InvalidProblem):
            Box((0.0, 0.0), (1.0,))

    def test_box_membership(self):
        b = Box((-0.5, 0.0), (0.5, 2.0))
        assert b.dim == 2
        assert b.contains([0.0, 1.0])
        assert not b.contains([0.6, 1.0])

    def test_unbounded_dim_zero_allowed(self):
        assert Unbounded(0).dim == 0


def test_surface_case_rejected_for_el():
    ig = lookup("ex1").integrand
    surf = SurfaceConstrained(lambda t: np.array([t]), lambda t: np.array([1.0]))
    with pytest.raises(InvalidProblem):
        VariationalProblem(ig, BoundarySpec(0.0, 0.0, surf), Unbounded(1))


def _lq(x0=0.0, dynamics_use_a=False):
    return OCProblem(
        f=(lambda x, u, a, t: np.array([u[0] + a[0]])) if dynamics_use_a else (lambda x, u, a, t: np.array([u[0]])),
        g=lambda x, u, a, t: 0.5 * u[0] ** 2 + 0.3 * x[0] * a[0],
        h=lambda x, t: x[0] ** 2,
        boundary=BoundarySpec(0.0, (x0,), FixedTimeFreeState(1.0)),
        uncertainty=Unbounded(1),
        n=1,
        r=1,
        additive_initial_uncertainty=True,
    )


class TestInitialStateTransform:
    def test_direct_substitution(self):
        p = _lq(x0=0.25)
        q = transform_initial_uncertainty(p)
        y, u, a = np.array([0.4]), np.array([-1.1]), np.array([0.7])
        assert np.allclose(q.dynamics(y, u, a, 0.3), u)
        assert q.terminal(y, a, 1.0) == pytest.approx((y[0] + a[0]) ** 2)
        assert np.allclose(q.x0, [0.25])  # y(t0) is the nominal state

    def test_sampled_running_cost(self, rng):
        p = _lq()
        q = transform_initial_uncertainty(p)
        for _ in range(100):
            y, u, a = rng.normal(size=1), rng.normal(size=1), rng.normal(size=1)
            t = rng.uniform(0, 1)
            assert q.running(y, u, a, t) - p.running(y + a, u, a, t) == 0.0

    def test_identity_at_zero_shift(self, rng):
        p = _lq()
        q = transform_initial_uncertainty(p)
        a = np.zeros(1)
        for _ in range(20):
            x, u = rng.normal(size=1), rng.normal(size=1)
            assert q.running(x, u, a, 0.5) == p.running(x, u, a, 0.5)
            assert q.terminal(x, a, 1.0) == p.terminal(x, a, 1.0)
            assert np.array_equal(q.back_map(x, a), x)

    def test_back_map_inverts_shift(self, rng):
        q = transform_initial_uncertainty(_lq())
        y = rng.normal(size=(11, 1))
        a = np.array([0.37])
        assert np.array_equal(q.back_map(y, a), y + a)
        assert np.allclose(q.back_map(y - a, a), y, rtol=0, atol=1e-15)

    def test_shifted_parameter_gradient(self, rng):
        q = transform_initial_uncertainty(_lq())
        for _ in range(20):
            y, u, a = rng.normal(size=1), rng.normal(size=1), rng.normal(size=1)
            assert np.allclose(q.g_a(y, u, a, 0.1), fd_gradient(lambda z: q.running(y, u, z, 0.1), a), atol=1e-6)

    def test_rejects_parameter_in_dynamics(self):
        with pytest.raises(InvalidProblem):
            transform_initial_uncertainty(_lq(dynamics_use_a=True))

    def test_rejects_undeclared_problem(self):
        with pytest.raises(InvalidProblem):
            transform_initial_uncertainty(lookup("ex5u"))


def test_scaling_and_negation():
    p = lookup("ex1")
    args = (0.3, -0.2, np.array([0.5]), 0.1)
    assert p.negated().integrand.value(*args) == -p.integrand.value(*args)
    assert p.scaled(2.5).integrand.dxx(*args) == pytest.approx(5.0)
