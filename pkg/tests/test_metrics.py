"""Transport solver and dependence score tests.

The exactness oracle is a brute-force minimum over all permutation
matchings (n <= 6); nonuniform-weight instances are cross-checked
against scipy's LP solver. Both accelerated and plain solver paths are
exercised in-process.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
import pytest
from scipy.optimize import linprog

from tailgan._netsimplex import _ns_numpy, solve_transport
from tailgan.angular import AngularSample
from tailgan.errors import ShapeError, ValidationError
from tailgan.metrics import (
    TransportPlan,
    coefficient_table,
    dependence_score,
    ot_solve,
    w2_distance,
)


def brute_force_w2(A, B):
    n = A.shape[0]
    C = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    best = min(sum(C[i, s[i]] for i in range(n)) for s in permutations(range(n)))
    return np.sqrt(best / n)


def linprog_objective(C, a, b):
    n1, n2 = C.shape
    A_eq = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        A_eq[i, i * n2 : (i + 1) * n2] = 1.0
    for j in range(n2):
        A_eq[n1 + j, j::n2] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), method="highs")
    assert res.status == 0
    return res.fun


class TestOtSolveHandExamples:
    def test_singletons(self):
        plan = ot_solve(np.array([[3.5]]), [1.0], [1.0])
        assert plan.objective == 3.5
        assert plan.pi.tolist() == [[1.0]]

    def test_identical_points_zero_objective_permutation_plan(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(6, 3))
        C = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
        w = np.full(6, 1.0 / 6.0)
        plan = ot_solve(C, w, w)
        assert plan.objective <= 1e-12
        scaled = plan.pi * 6.0
        assert np.allclose(scaled.sum(axis=0), 1.0, atol=1e-9)
        assert np.allclose(scaled.sum(axis=1), 1.0, atol=1e-9)
        # mass only on zero-cost arcs
        assert (plan.pi[C > 1e-12] == 0.0).all()

    def test_vertical_matching(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0]])
        B = np.array([[0.0, 1.0], [1.0, 1.0]])
        C = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
        w = np.array([0.5, 0.5])
        plan = ot_solve(C, w, w)
        assert abs(plan.objective - 1.0) <= 1e-12
        assert w2_distance(A, B) == pytest.approx(1.0, abs=1e-12)

    def test_returns_transport_plan_type(self):
        plan = ot_solve(np.array([[1.0, 2.0]]), [1.0], [0.25, 0.75])
        assert isinstance(plan, TransportPlan)
        assert plan.iterations >= 0
        assert plan.objective == pytest.approx(0.25 * 1.0 + 0.75 * 2.0, abs=1e-12)


class TestOtSolveOracles:
    def test_brute_force_small_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            n = int(rng.integers(1, 7))
            d = int(rng.integers(1, 5))
            A = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
            B = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
            got = w2_distance(A, B)
            want = brute_force_w2(A, B)
            assert abs(got - want) <= 1e-9

    def test_nonuniform_weights_match_linprog(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            n1 = int(rng.integers(2, 9))
            n2 = int(rng.integers(2, 9))
            C = rng.uniform(0.0, 5.0, size=(n1, n2))
            a = rng.uniform(0.1, 1.0, n1)
            a /= a.sum()
            b = rng.uniform(0.1, 1.0, n2)
            b /= b.sum()
            plan = ot_solve(C, a, b)
            assert abs(plan.objective - linprog_objective(C, a, b)) <= 1e-9

    def test_uniform_unequal_sizes_match_linprog(self):
        rng = np.random.default_rng(19)
        for n1, n2 in [(3, 2), (5, 7), (6, 4)]:
            C = rng.uniform(0.0, 3.0, size=(n1, n2))
            a = np.full(n1, 1.0 / n1)
            b = np.full(n2, 1.0 / n2)
            plan = ot_solve(C, a, b)
            assert abs(plan.objective - linprog_objective(C, a, b)) <= 1e-9

    def test_both_solver_paths_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(4):
            n1 = int(rng.integers(10, 40))
            n2 = int(rng.integers(10, 40))
            C = rng.uniform(0.0, 5.0, size=(n1, n2))
            a = rng.uniform(0.1, 1.0, n1)
            a /= a.sum()
            b = rng.uniform(0.1, 1.0, n2)
            b /= b.sum()
            supply = np.concatenate([a, -b])
            f1, _, s1, _ = solve_transport(C, supply, 100000)
            f2, _, s2, _ = _ns_numpy(C, supply, 100000)
            assert s1 == 0 and s2 == 0
            o1 = f1[: n1 * n2] @ C.ravel()
            o2 = f2[: n1 * n2] @ C.ravel()
            assert abs(o1 - o2) <= 1e-9 * max(1.0, abs(o1))


class TestOtSolveProperties:
    def test_marginals_within_tolerance(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n1 = int(rng.integers(2, 30))
            n2 = int(rng.integers(2, 30))
            C = rng.uniform(0.0, 10.0, size=(n1, n2))
            a = rng.uniform(0.01, 1.0, n1)
            a /= a.sum()
            b = rng.uniform(0.01, 1.0, n2)
            b /= b.sum()
            plan = ot_solve(C, a, b)
            assert np.abs(plan.pi.sum(axis=1) - a).max() <= 1e-9
            assert np.abs(plan.pi.sum(axis=0) - b).max() <= 1e-9
            assert (plan.pi >= 0.0).all()

    def test_permutation_invariance(self):
        rng = np.random.default_rng(31)
        C = rng.uniform(0.0, 4.0, size=(7, 5))
        a = rng.uniform(0.1, 1.0, 7)
        a /= a.sum()
        b = rng.uniform(0.1, 1.0, 5)
        b /= b.sum()
        base = ot_solve(C, a, b).objective
        pr = rng.permutation(7)
        pc = rng.permutation(5)
        permuted = ot_solve(C[np.ix_(pr, pc)], a[pr], b[pc]).objective
        assert abs(base - permuted) <= 1e-9

    def test_duality_gap_closed(self):
        rng = np.random.default_rng(37)
        C = rng.uniform(0.0, 6.0, size=(12, 9))
        a = rng.uniform(0.1, 1.0, 12)
        a /= a.sum()
        b = rng.uniform(0.1, 1.0, 9)
        b /= b.sum()
        plan = ot_solve(C, a, b)
        dual = a @ plan.alpha + b @ plan.beta
        assert abs(plan.objective - dual) <= 1e-7
        rc = C - plan.alpha[:, None] - plan.beta[None, :]
        assert rc.min() >= -1e-7

    def test_zero_weight_rows_get_zero_plan(self):
        C = np.array([[1.0, 2.0], [0.5, 0.1], [3.0, 1.0]])
        a = np.array([0.5, 0.0, 0.5])
        b = np.array([0.5, 0.5])
        plan = ot_solve(C, a, b)
        assert (plan.pi[1] == 0.0).all()
        assert np.abs(plan.pi.sum(axis=1) - a).max() <= 1e-9
        assert abs(plan.objective - linprog_objective(C, a, b)) <= 1e-9

    def test_duplicate_points_degenerate_pivots(self):
        A = np.zeros((5, 2))
        A[3:] = 1.0
        B = np.ones((5, 2))
        B[:2] = 0.0
        # 3 copies of origin vs 2, so one unit of mass must travel
        got = w2_distance(A, B)
        assert got == pytest.approx(np.sqrt(2.0 / 5.0), abs=1e-12)


class TestW2Properties:
    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(41)
        for _ in range(5):
            A = rng.normal(size=(8, 3))
            B = rng.normal(size=(11, 3))
            dab = w2_distance(A, B)
            dba = w2_distance(B, A)
            assert dab >= 0.0
            assert abs(dab - dba) <= 1e-9

    def test_zero_iff_equal_multisets(self):
        rng = np.random.default_rng(43)
        A = rng.normal(size=(6, 2))
        perm = rng.permutation(6)
        assert w2_distance(A, A[perm]) <= 1e-9
        B = A.copy()
        B[0, 0] += 0.5
        assert w2_distance(A, B) > 1e-3

    def test_triangle_inequality(self):
        rng = np.random.default_rng(47)
        for _ in range(15):
            n = int(rng.integers(2, 9))
            A = rng.normal(size=(n, 3))
            B = rng.normal(size=(n, 3))
            C = rng.normal(size=(n, 3))
            assert w2_distance(A, C) <= w2_distance(A, B) + w2_distance(B, C) + 1e-9

    def test_singleton_distance_is_euclidean(self):
        x = np.array([[1.0, 2.0, 2.0]])
        y = np.array([[0.0, 0.0, 0.0]])
        assert w2_distance(x, y) == pytest.approx(3.0, abs=1e-12)


class TestValidation:
    def test_weight_sum_error(self):
        with pytest.raises(ValidationError):
            ot_solve(np.array([[1.0]]), [1.0 + 1e-6], [1.0])

    def test_negative_weight_error(self):
        with pytest.raises(ValidationError):
            ot_solve(np.eye(2), [1.5, -0.5], [0.5, 0.5])

    def test_weight_shape_error(self):
        with pytest.raises(ShapeError):
            ot_solve(np.eye(2), [1.0], [0.5, 0.5])

    def test_nonfinite_cost_error(self):
        with pytest.raises(ValidationError):
            ot_solve(np.array([[np.inf]]), [1.0], [1.0])

    def test_dimension_mismatch_error(self):
        with pytest.raises(ShapeError):
            w2_distance(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_empty_point_set_error(self):
        with pytest.raises(ShapeError):
            w2_distance(np.zeros((0, 2)), np.zeros((3, 2)))


class TestDependenceScore:
    def test_identical_samples_score_zero(self):
        rng = np.random.default_rng(53)
        pts = rng.dirichlet(np.ones(5), size=40)
        phi = AngularSample(points=pts)
        assert dependence_score(phi, phi, 5, 2) == 0.0
        assert dependence_score(phi, phi, 5, 3) == 0.0

    def test_hand_example_single_pair(self):
        # d=2: theta over the single pair {0,1} is 2 * E[max(w0, w1)]
        phi_g = AngularSample(points=np.array([[0.6, 0.4]]))  # theta = 1.2
        phi_t = AngularSample(points=np.array([[0.75, 0.25]]))  # theta = 1.5
        score = dependence_score(phi_g, phi_t, 2, 2)
        assert score == pytest.approx(0.2, abs=1e-12)

    def test_k_validation(self):
        phi = AngularSample(points=np.full((3, 4), 0.25))
        with pytest.raises(ValidationError):
            dependence_score(phi, phi, 4, 4)

    def test_dimension_mismatch(self):
        phi2 = AngularSample(points=np.full((3, 2), 0.5))
        phi3 = AngularSample(points=np.full((3, 3), 1.0 / 3.0))
        with pytest.raises(ShapeError):
            dependence_score(phi2, phi3, 2, 2)

    def test_coefficient_table_shares_subsets(self):
        rng = np.random.default_rng(59)
        phi_g = AngularSample(points=rng.dirichlet(np.ones(6), size=30))
        phi_t = AngularSample(points=rng.dirichlet(np.ones(6), size=25))
        subsets, tg, tt = coefficient_table(phi_g, phi_t, 2)
        assert subsets.shape == (15, 2)
        assert tg.shape == tt.shape == (15,)
        score = dependence_score(phi_g, phi_t, 6, 2)
        assert score == pytest.approx(float(np.mean(np.abs(1.0 - tg / tt))), abs=1e-15)

    def test_score_reflects_known_gap(self):
        # independent-vertices sample vs fully dependent center point
        phi_ind = AngularSample(points=np.eye(3))
        phi_dep = AngularSample(points=np.full((1, 3), 1.0 / 3.0))
        # theta_G = 2 (pairs of vertices), theta_T = 1 -> |1 - 2| = 1
        assert dependence_score(phi_ind, phi_dep, 3, 2) == pytest.approx(1.0, abs=1e-12)
