import csv

import numpy as np
import pytest

from conftest import oc_solution
from varimax.errors import InvalidProblem
from varimax.numerics import TimeGrid, Trajectory
from varimax.problems import BoundarySpec, Box, FixedTimeFreeState, OCProblem, Unbounded, lookup
from varimax.robust import (
    CandidateControl,
    boundary_candidates,
    box_grid,
    evaluate_cost_at,
    evaluate_costs,
    oc_saddle_probe,
    robust_candidates,
    worst_case_scan,
)

BOX_GRID = np.linspace(-0.5, 0.5, 101)


@pytest.fixture(scope="module")
def ex5():
    return lookup("ex5")


@pytest.fixture(scope="module")
def cands():
    return [
        CandidateControl("u", "interior", oc_solution("ex5u")),
        CandidateControl("u1", np.array([-0.5]), oc_solution("ex5", -0.5)),
        CandidateControl("u2", np.array([0.5]), oc_solution("ex5", 0.5)),
    ]


def two_param_problem(lo, hi):
    return OCProblem(
        f=lambda x, u, a, t: np.array([u[0] + a[0] - a[1]]),
        g=lambda x, u, a, t: 0.5 * u[0] ** 2,
        h=lambda x, t: 0.0,
        boundary=BoundarySpec(0.0, (0.0,), FixedTimeFreeState(1.0)),
        uncertainty=Box(lo, hi),
        n=1,
        r=1,
    )


class TestBoundaryCandidates:
    def test_scalar_box_outside(self, ex5):
        fr = boundary_candidates(ex5, interior_a=[0.632])
        assert [f.frozen_a for f in fr] == [(-0.5,), (0.5,)]
        assert all(f.free_param_dim == 0 for f in fr)

    def test_interior_inside_box(self, ex5):
        assert boundary_candidates(ex5, interior_a=[0.1]) == []

    def test_two_parameter_vertices(self):
        fr = boundary_candidates(two_param_problem((0, 0), (1, 2)), interior_a=[3.0, 3.0])
        assert sorted(f.frozen_a for f in fr) == [(0, 0), (0, 2), (1, 0), (1, 2)]

    def test_vertex_cap(self):
        p = two_param_problem((0,) * 7, (1,) * 7)
        with pytest.raises(InvalidProblem):
            boundary_candidates(p)
        assert len(boundary_candidates(p, cap=128)) == 128

    def test_needs_box(self):
        with pytest.raises(InvalidProblem):
            boundary_candidates(lookup("ex5u"))

    def test_robust_candidates_labels(self, ex5):
        c = robust_candidates(ex5, n_nodes=201)
        assert [x.label for x in c] == ["u", "u1", "u2"]
        assert c[0].frozen_a == "interior"
        assert all(x.solution.converged for x in c)


class TestEvaluateCost:
    @pytest.mark.parametrize("idx,a,J", [(2, 0.5, 4.379), (1, -0.5, -1.211)])
    def test_rounded_reference_costs(self, ex5, cands, idx, a, J):
        assert abs(evaluate_cost_at(ex5, cands[idx].solution.u, [a]) - J) <= 5e-2

    def test_zero_control(self):
        p = OCProblem(
            f=lambda x, u, a, t: np.array([u[0]]),
            g=lambda x, u, a, t: 0.5 * u[0] ** 2,
            h=lambda x, t: 0.0,
            boundary=BoundarySpec(0.0, (0.0,), FixedTimeFreeState(1.0)),
            uncertainty=Unbounded(1),
            n=1,
            r=1,
        )
        u = Trajectory(TimeGrid(0, 1, 101), np.zeros(101), "control")
        assert evaluate_cost_at(p, u, [0.3]) == 0.0

    def test_matches_solver(self, ex5, cands):
        for c in cands:
            s = c.solution
            assert abs(evaluate_cost_at(ex5, s.u, s.a_star) - s.cost) <= 1e-6

    def test_batched_equals_pointwise(self, ex5, cands):
        costs, failed = evaluate_costs(ex5, cands[0].solution.u, BOX_GRID[::10, None])
        assert not failed.any()
        ref = [evaluate_cost_at(ex5, cands[0].solution.u, [a]) for a in BOX_GRID[::10]]
        assert np.allclose(costs, ref, rtol=0, atol=1e-12)


class TestWorstCaseScan:
    def test_boundary_pair_picks_upper(self, ex5, cands):
        res = worst_case_scan(ex5, cands[1:], BOX_GRID)
        assert res.winner_label == "u2"

    def test_with_interior(self, ex5, cands):
        res = worst_case_scan(ex5, cands, BOX_GRID)
        assert res.cost_matrix.shape == (3, 101)
        assert res.winner_label == "u2"
        assert np.all(res.worst_case[res.winner] <= res.worst_case)
        assert res.worst_case == pytest.approx([4.516, 7.582, 4.379], abs=5e-3)

    def test_single_candidate(self, ex5, cands):
        assert worst_case_scan(ex5, cands[:1], BOX_GRID).winner == 0

    def test_wide_grid_interior_best(self, ex5, cands):
        wide = np.linspace(-3, 3, 121)
        res = worst_case_scan(ex5, cands, wide, box=Box((-3.0,), (3.0,)))
        full_max = res.cost_matrix.max(axis=1)
        assert full_max[0] < full_max[1] and full_max[0] < full_max[2]

    def test_points_outside_box_excluded(self, ex5, cands):
        grid = np.linspace(-1, 1, 41)
        res = worst_case_scan(ex5, cands, grid)
        assert res.in_box.sum() == 21
        inside = res.cost_matrix[:, res.in_box].max(axis=1)
        assert np.array_equal(res.worst_case, inside)
        assert np.all(np.isfinite(res.cost_matrix))

    def test_ties_go_to_lowest_index(self, ex5, cands):
        res = worst_case_scan(ex5, [cands[2], cands[2]], BOX_GRID)
        assert res.winner == 0

    def test_failed_cell_disqualifies(self):
        p = OCProblem(
            f=lambda x, u, a, t: np.array([a[0] * x[0] ** 2 + u[0]]),
            g=lambda x, u, a, t: 0.5 * u[0] ** 2,
            h=lambda x, t: 0.0,
            boundary=BoundarySpec(0.0, (0.0,), FixedTimeFreeState(2.0)),
            uncertainty=Box((0.0,), (5.0,)),
            n=1,
            r=1,
        )
        g = TimeGrid(0, 2, 201)
        push = CandidateControl("u", "interior", _fake_solution(g, np.ones(201)))  # x' = a x^2 + 1 blows up
        zero = CandidateControl("u1", np.array([0.0]), _fake_solution(g, np.zeros(201)))
        with np.errstate(over="ignore", invalid="ignore"):
            res = worst_case_scan(p, [push, zero], np.linspace(0, 5, 6))
        assert res.failed[0].any() and not res.failed[1].any()
        assert np.isinf(res.worst_case[0])
        assert res.winner_label == "u1"

    def test_grid_refinement_stable(self, ex5, cands):
        coarse = worst_case_scan(ex5, cands, BOX_GRID)
        fine = worst_case_scan(ex5, cands, np.linspace(-0.5, 0.5, 201))
        assert fine.winner == coarse.winner
        lipschitz = np.max(np.abs(np.diff(coarse.cost_matrix, axis=1)), axis=1)
        assert np.all(np.abs(fine.worst_case - coarse.worst_case) <= lipschitz)

    def test_csv(self, ex5, cands, tmp_path):
        res = worst_case_scan(ex5, cands, BOX_GRID)
        path = tmp_path / "scan.csv"
        res.write_csv(path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["a", "J_u", "J_u1", "J_u2"]
        assert len(rows) == 102
        back = np.array(rows[1:], dtype=float)
        assert np.array_equal(back[:, 1:].T, res.cost_matrix)

    def test_box_grid_product(self):
        g = box_grid(Box((0, 0), (1, 2)), 3)
        assert g.shape == (9, 2)

    def test_requires_candidates(self, ex5):
        with pytest.raises(ValueError):
            worst_case_scan(ex5, [], BOX_GRID)


def _fake_solution(grid, u):
    from varimax.oc import OCSolution

    traj = Trajectory(grid, u, "control")
    z = Trajectory(grid, np.zeros(grid.n_nodes), "state")
    return OCSolution(z, z, traj, np.zeros(1), grid.tf, 0.0, 0.0, 0, True, np.zeros(grid.n_nodes))


class TestOCProbe:
    @pytest.mark.parametrize("mag", [0.01, 0.05])
    def test_unbounded_saddle(self, mag):
        r = oc_saddle_probe(lookup("ex5u"), oc_solution("ex5u"), 100, mag)
        assert r.violations == 0

    def test_box_winner_with_clipping(self, ex5, cands):
        r = oc_saddle_probe(ex5, cands[2].solution, 100, 0.05)
        assert r.violations == 0

    def test_detects_non_saddle(self):
        # convex in a: the stationary a is a minimiser, so raising/lowering a increases J
        s = oc_solution("lq-init")
        from varimax.problems import transform_initial_uncertainty

        r = oc_saddle_probe(transform_initial_uncertainty(lookup("lq-init")), s, 20, 0.05)
        assert r.violations_a > 0
