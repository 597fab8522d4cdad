"""Brute-force, sketched, and LASSO solvers against independent oracles."""

import math

import numpy as np
import pytest
from scipy.optimize import linprog
from sklearn.linear_model import Lasso

from sketchreg import (
    ProblemTooLarge,
    RngStream,
    SparseVector,
    brute_force_sparse_l2,
    brute_force_sparse_lp,
    build_gaussian_sketch,
    build_relu_sketch,
    build_stable_sketch,
    lasso_sketched_solve,
    lasso_solve,
    make_sketched_instance,
    sketched_sparse_min,
)
from sketchreg.sketches import IdentitySketch


def _l1_regression_lp(A, b):
    """Exact l1 regression as a linear program: min sum(t), -t <= Ax-b <= t."""
    n, d = A.shape
    c = np.concatenate([np.zeros(d), np.ones(n)])
    A_ub = np.block([[A, -np.eye(n)], [-A, -np.eye(n)]])
    b_ub = np.concatenate([b, -b])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * d + [(0, None)] * n,
        method="highs",
    )
    assert res.status == 0
    return res.x[:d], res.fun


def _golden_min(fun, lo, hi, iters=200):
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c1, c2 = b - phi * (b - a), a + phi * (b - a)
    f1, f2 = fun(c1), fun(c2)
    for _ in range(iters):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = fun(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = fun(c2)
    return (a + b) / 2


class TestSparseVector:
    def test_make_sorts_and_drops_zeros(self):
        x = SparseVector.make(10, [7, 2, 5], [1.0, 0.0, -3.0])
        np.testing.assert_array_equal(x.support, [5, 7])
        np.testing.assert_array_equal(x.values, [-3.0, 1.0])
        assert x.nnz == 2

    def test_dense_round_trip(self):
        v = np.array([0.0, 1.5, 0.0, -2.0, 0.0])
        x = SparseVector.from_dense(v)
        np.testing.assert_array_equal(x.to_dense(), v)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            SparseVector(dim=5, support=np.array([1, 1]), values=np.array([1.0, 2.0]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            SparseVector(dim=3, support=np.array([3]), values=np.array([1.0]))

    def test_rejects_explicit_zero(self):
        with pytest.raises(ValueError):
            SparseVector(dim=3, support=np.array([1]), values=np.array([0.0]))


class TestBruteForceL2:
    def test_identity_selects_largest_entry(self):
        res = brute_force_sparse_l2(np.eye(4), np.array([0.0, 1.0, 0.0, 0.0]), 1)
        np.testing.assert_array_equal(res.x.support, [1])
        np.testing.assert_array_equal(res.x.values, [1.0])
        assert res.cost == pytest.approx(0.0, abs=1e-12)
        assert res.supports_explored == 4

    def test_b_in_column_span(self):
        g = np.random.default_rng(0)
        A = g.standard_normal((6, 3))
        b = A @ np.array([1.0, -2.0, 0.5])
        res = brute_force_sparse_l2(A, b, 3)
        assert res.cost == pytest.approx(0.0, abs=1e-9)

    def test_matches_normal_equation_oracle(self):
        import itertools

        g = np.random.default_rng(11)
        A = g.standard_normal((8, 5))
        b = g.standard_normal(8)
        best_cost, best_supp = math.inf, None
        for supp in itertools.combinations(range(5), 2):
            cols = A[:, supp]
            x = np.linalg.solve(cols.T @ cols, cols.T @ b)
            cost = float(np.linalg.norm(cols @ x - b))
            if cost < best_cost:
                best_cost, best_supp = cost, supp
        res = brute_force_sparse_l2(A, b, 2)
        assert res.cost == pytest.approx(best_cost, rel=1e-8)
        np.testing.assert_array_equal(res.x.support, best_supp)
        assert res.supports_explored == 10

    def test_cost_ties_go_to_lex_smallest_support(self):
        A = np.array([[1.0, 1.0], [0.0, 0.0]])
        res = brute_force_sparse_l2(A, np.array([1.0, 0.0]), 1)
        np.testing.assert_array_equal(res.x.support, [0])

    def test_dominates_random_candidates(self):
        g = np.random.default_rng(12)
        A = g.standard_normal((10, 6))
        b = g.standard_normal(10)
        res = brute_force_sparse_l2(A, b, 2)
        for _ in range(200):
            supp = np.sort(g.choice(6, size=2, replace=False))
            cand = np.zeros(6)
            cand[supp] = g.standard_normal(2)
            assert res.cost <= np.linalg.norm(A @ cand - b) + 1e-12

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            brute_force_sparse_l2(np.eye(3), np.ones(3), 0)
        with pytest.raises(ValueError):
            brute_force_sparse_l2(np.eye(3), np.ones(3), 4)


class TestBruteForceLp:
    def test_near_two_matches_l2(self):
        g = np.random.default_rng(21)
        A = g.standard_normal((8, 5))
        b = g.standard_normal(8)
        lp = brute_force_sparse_lp(A, b, 2, 1.999)
        l2 = brute_force_sparse_l2(A, b, 2)
        assert lp.cost == pytest.approx(l2.cost, rel=1e-3)
        np.testing.assert_array_equal(lp.x.support, l2.x.support)

    def test_full_support_l1_matches_linear_program(self):
        g = np.random.default_rng(22)
        A = g.standard_normal((5, 2))
        b = g.standard_normal(5)
        res = brute_force_sparse_lp(A, b, 2, 1.0)
        x_lp, cost_lp = _l1_regression_lp(A, b)
        assert res.cost == pytest.approx(cost_lp, rel=1e-5, abs=1e-7)
        assert res.cost >= cost_lp - 1e-9

    def test_l1_constant_column_is_median(self):
        A = np.ones((3, 1))
        b = np.array([0.0, 1.0, 10.0])
        res = brute_force_sparse_lp(A, b, 1, 1.0)
        assert res.x.values[0] == pytest.approx(1.0, abs=1e-6)
        assert res.cost == pytest.approx(10.0, rel=1e-9)

    def test_zero_rhs(self):
        res = brute_force_sparse_lp(np.eye(3), np.zeros(3), 2, 1.5)
        assert res.cost == 0.0
        assert res.x.nnz == 0

    def test_p_out_of_range(self):
        for p in (0.5, 2.5):
            with pytest.raises(ValueError):
                brute_force_sparse_lp(np.eye(3), np.ones(3), 1, p)


class TestSketchedSparseMin:
    def test_identity_sketch_equals_brute_force(self):
        g = np.random.default_rng(31)
        A = g.standard_normal((20, 6))
        b = g.standard_normal(20)
        si = make_sketched_instance(IdentitySketch(n=20), A, b)
        sk = sketched_sparse_min(si, "l2", 2)
        bf = brute_force_sparse_l2(A, b, 2)
        assert sk.cost == pytest.approx(bf.cost, rel=1e-10)
        np.testing.assert_array_equal(sk.x.support, bf.x.support)
        assert sk.supports_explored == bf.supports_explored

    def test_zero_rhs(self):
        si = make_sketched_instance(IdentitySketch(n=8), np.eye(8), np.zeros(8))
        res = sketched_sparse_min(si, "l2", 3)
        assert res.cost == pytest.approx(0.0, abs=1e-12)

    def test_relu_identity_improves_on_l2_start(self):
        g = np.random.default_rng(32)
        A = g.standard_normal((25, 4))
        b = g.standard_normal(25)
        sk = build_relu_sketch(25, 25, RngStream(120, 0), testing_identity=True)
        si = make_sketched_instance(sk, A, b)
        res = sketched_sparse_min(si, "relu", 1)
        from sketchreg import estimate_relu
        from sketchreg.solvers import _ls

        # pattern search must do no worse than its l2 warm start on any support
        for j in range(4):
            x0 = _ls(A[:, [j]], b)
            start = estimate_relu(si, SparseVector.make(4, [j], x0))
            assert res.cost <= start + 1e-12

    def test_med_estimator_runs(self):
        g = np.random.default_rng(33)
        A = g.standard_normal((30, 4))
        b = g.standard_normal(30)
        sk = build_stable_sketch(64, 30, 1.0, RngStream(121, 0))
        si = make_sketched_instance(sk, A, b)
        res = sketched_sparse_min(si, "med", 2)
        assert res.cost >= 0.0
        assert res.x.nnz <= 2

    def test_hinge_requires_loss(self):
        si = make_sketched_instance(IdentitySketch(n=5), np.eye(5), np.ones(5))
        with pytest.raises(ValueError):
            sketched_sparse_min(si, "hinge", 1)

    def test_unknown_estimator(self):
        si = make_sketched_instance(IdentitySketch(n=5), np.eye(5), np.ones(5))
        with pytest.raises(ValueError):
            sketched_sparse_min(si, "huber", 1)


class TestGuard:
    def test_combination_guard_trips(self):
        A = np.zeros((4, 200))
        with pytest.raises(ProblemTooLarge):
            brute_force_sparse_l2(A, np.zeros(4), 10)
        si = make_sketched_instance(IdentitySketch(n=4), A, np.zeros(4))
        with pytest.raises(ProblemTooLarge):
            sketched_sparse_min(si, "l2", 10)


def _unit_scale(A, b):
    A = 0.9 * A / np.linalg.norm(A, 2)
    b = 0.9 * b / np.linalg.norm(b)
    return A, b


class TestLasso:
    def test_zero_rhs(self):
        res = lasso_solve(0.5 * np.eye(4), np.zeros(4), 0.1)
        assert res.x.nnz == 0
        assert res.cost == 0.0

    def test_one_dimensional_closed_form(self):
        g = np.random.default_rng(41)
        a = g.standard_normal(30)
        v = g.standard_normal(30)
        A, b = _unit_scale(a[:, None], v)
        a1, lam = A[:, 0], 0.2
        av = float(a1 @ b)
        closed = math.copysign(max(0.0, abs(av) - lam / 2), av) / float(a1 @ a1)
        res = lasso_solve(A, b, lam)
        got = res.x.to_dense()[0]
        assert got == pytest.approx(closed, abs=1e-8)
        # independent 1-d convex search oracle
        obj = lambda t: float((a1 * t - b) @ (a1 * t - b) + lam * abs(t))
        assert got == pytest.approx(_golden_min(obj, -2.0, 2.0), abs=1e-6)

    def test_matches_sklearn(self):
        g = np.random.default_rng(42)
        A, b = _unit_scale(g.standard_normal((60, 12)), g.standard_normal(60))
        lam = 0.05
        res = lasso_solve(A, b, lam, tol=1e-12)
        ref = Lasso(alpha=lam / (2 * 60), fit_intercept=False, max_iter=100000, tol=1e-12)
        ref.fit(A, b)
        obj = lambda x: float(np.sum((A @ x - b) ** 2) + lam * np.abs(x).sum())
        assert res.cost == pytest.approx(obj(ref.coef_), rel=1e-6)
        np.testing.assert_allclose(res.x.to_dense(), ref.coef_, atol=1e-4)

    def test_heavy_penalty_zeroes_out(self):
        g = np.random.default_rng(43)
        A, b = _unit_scale(g.standard_normal((20, 3)), g.standard_normal(20))
        # soft threshold kills every coordinate once lam/2 > max |a_j . b|
        assert np.max(np.abs(A.T @ b)) < 0.495
        res = lasso_solve(A, b, 0.99)
        assert res.x.nnz == 0

    def test_l1_bounded_by_objective_over_lam(self):
        g = np.random.default_rng(44)
        A, b = _unit_scale(g.standard_normal((40, 8)), g.standard_normal(40))
        lam = 0.1
        res = lasso_solve(A, b, lam)
        assert lam * np.abs(res.x.to_dense()).sum() <= res.cost + 1e-12

    def test_warns_on_large_norms(self):
        g = np.random.default_rng(45)
        with pytest.warns(UserWarning):
            lasso_solve(3.0 * g.standard_normal((10, 2)), 0.1 * g.standard_normal(10), 0.1)

    def test_lam_out_of_range(self):
        for lam in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                lasso_solve(np.eye(3), np.ones(3), lam)


class TestLassoSketched:
    def test_identity_matches_direct(self):
        g = np.random.default_rng(51)
        A, b = _unit_scale(g.standard_normal((30, 6)), g.standard_normal(30))
        direct = lasso_solve(A, b, 0.1)
        sk = lasso_sketched_solve(IdentitySketch(n=30), A, b, 0.1)
        assert sk.cost == pytest.approx(direct.cost, rel=1e-12)
        np.testing.assert_array_equal(sk.x.support, direct.x.support)
        np.testing.assert_allclose(sk.x.values, direct.x.values, rtol=1e-10)

    def test_gaussian_sketch_near_unsketched(self):
        g = np.random.default_rng(52)
        A, b = _unit_scale(g.standard_normal((400, 10)), g.standard_normal(400))
        lam = 0.1
        direct = lasso_solve(A, b, lam)
        S = build_gaussian_sketch(300, 400, RngStream(130, 0))
        res = lasso_sketched_solve(S, A, b, lam)
        # reported cost is on the original data
        assert res.cost == pytest.approx(direct.cost, rel=0.25)
        # monotone descent from zero keeps the sketched objective below ||Sb||^2
        SA, Sb = S.apply_matrix(A), S.apply(b)
        x = res.x.to_dense()
        sk_obj = float(np.sum((SA @ x - Sb) ** 2) + lam * np.abs(x).sum())
        assert sk_obj <= float(Sb @ Sb) + 1e-12

    def test_rejects_wrong_sketch(self):
        A, b = np.eye(8), np.ones(8) / 3
        S = build_stable_sketch(4, 8, 1.0, RngStream(131, 0))
        with pytest.raises(ValueError):
            lasso_sketched_solve(S, A, b, 0.1)
        S2 = build_gaussian_sketch(4, 8, RngStream(132, 0), variance=1.0)
        with pytest.raises(ValueError):
            lasso_sketched_solve(S2, A, b, 0.1)
