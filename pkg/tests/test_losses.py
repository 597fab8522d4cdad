"""Loss evaluations and the mu-complexity certificate search."""

import math

import numpy as np
import pytest

from sketchreg import (
    HingeLikeLoss,
    RngStream,
    certify_mu,
    f_norm,
    lp_norm,
    median_norm,
    relu_norm,
)
from sketchreg.instances import RegressionInstance, gen_mu_instance


class TestLpNorm:
    def test_zero(self):
        assert lp_norm(np.zeros(5), 1.7) == 0.0

    def test_pythagorean(self):
        assert lp_norm(np.array([3.0, 4.0]), 2.0) == 5.0

    def test_p15_direct(self):
        np.testing.assert_allclose(lp_norm(np.ones(4), 1.5), 4.0 ** (2 / 3), rtol=1e-12)

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            lp_norm(np.ones(3), 0.99)


class TestMedianNorm:
    def test_singleton(self):
        assert median_norm(np.array([-2.0])) == 2.0

    def test_odd_length(self):
        assert median_norm(np.array([1.0, -3.0, 2.0])) == 2.0

    def test_even_length_lower_median(self):
        assert median_norm(np.array([1.0, 2.0, 3.0, 4.0])) == 2.0

    def test_matches_sort_oracle(self):
        g = np.random.default_rng(0)
        for trial in range(50):
            y = g.standard_normal(g.integers(1, 30))
            expect = np.sort(np.abs(y))[(y.size - 1) // 2]
            assert median_norm(y) == expect

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            median_norm(np.array([]))


class TestReluNorm:
    def test_nonpositive_is_zero(self):
        assert relu_norm(np.array([-1.0, 0.0, -3.5])) == 0.0

    def test_two_point_identity(self):
        y = np.array([1.0, -1.0])
        assert relu_norm(y) == 1.0
        assert (lp_norm(y, 1.0) + y.sum()) / 2 == 1.0

    def test_half_l1_plus_sum_identity(self):
        g = np.random.default_rng(1)
        for _ in range(1000):
            y = g.standard_normal(100)
            lhs = relu_norm(y)
            rhs = (lp_norm(y, 1.0) + y.sum()) / 2
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestHingeLikeLoss:
    def test_logistic_constants_and_values(self):
        f = HingeLikeLoss.logistic()
        assert (f.L, f.a1, f.a2) == (1.0, math.log(2), math.log(2))
        np.testing.assert_allclose(f(np.array([0.0]))[0], math.log(2), rtol=1e-15)
        assert f_norm(np.zeros(10), f) == pytest.approx(10 * math.log(2))
        f.validate()

    def test_hinge_constants_and_values(self):
        f = HingeLikeLoss.hinge()
        assert (f.L, f.a1, f.a2) == (1.0, 1.0, 1.0)
        assert f(np.array([0.0]))[0] == 1.0
        assert f(np.array([-2.0]))[0] == 0.0
        f.validate()

    def test_relu_reference_reproduces_relu_norm(self):
        f = HingeLikeLoss.relu_reference()
        y = np.random.default_rng(2).standard_normal(40)
        assert f_norm(y, f) == relu_norm(y)

    def test_relu_reference_has_no_hinge_constant(self):
        with pytest.raises(ValueError):
            HingeLikeLoss.relu_reference().hinge_constant

    def test_hinge_constant_formula(self):
        # C(f) = 16 max(1, L, a1, 1/a2)^4; logistic is dominated by 1/ln 2
        f = HingeLikeLoss.logistic()
        np.testing.assert_allclose(f.hinge_constant, 16.0 / math.log(2) ** 4, rtol=1e-12)
        assert HingeLikeLoss.hinge().hinge_constant == 16.0

    def test_tabulated_accepts_valid(self):
        f = HingeLikeLoss.tabulated(lambda r: np.logaddexp(0.0, r), 1.0, math.log(2), math.log(2))
        assert f.family == "tabulated"

    def test_tabulated_rejects_bad_a1(self):
        # claims |f - relu| <= 0.1 but the true gap is ln 2 at 0
        with pytest.raises(ValueError):
            HingeLikeLoss.tabulated(lambda r: np.logaddexp(0.0, r), 1.0, 0.1, math.log(2))

    def test_tabulated_rejects_bad_lipschitz(self):
        with pytest.raises(ValueError):
            HingeLikeLoss.tabulated(lambda r: np.maximum(0.0, 2.0 * r), 1.0, 50.0, 0.0001)

    def test_f_norm_floor_on_nonnegative(self):
        g = np.random.default_rng(3)
        for f in (HingeLikeLoss.logistic(), HingeLikeLoss.hinge()):
            y = np.abs(g.standard_normal(25))
            assert f_norm(y, f) >= 25 * f.a2


class TestMuCertificate:
    def test_paired_rows_ratio_exactly_one(self):
        # A = [G; -G]: positive and negative parts swap, ratio = 1 for all x
        G = np.random.default_rng(4).standard_normal((20, 4))
        A = np.vstack([G, -G])
        inst = RegressionInstance(A=A, b=np.zeros(40), meta={"mu_upper": 1.0})
        cert = certify_mu(inst, 50, RngStream(80, 0))
        assert cert.upper_bound == 1.0
        assert cert.empirical_lower == pytest.approx(1.0, abs=1e-12)

    def test_scaled_pair_certificate_algebra(self):
        # A = [G; -G/c]: ratio = (P + N/c)/(N + P/c) <= c identically
        c = 2.0
        inst = gen_mu_instance(30, 5, c, RngStream(81, 0))
        g = np.random.default_rng(5)
        for _ in range(10_000):
            x = g.standard_normal(5)
            y = inst.A @ x
            pos = y[y > 0].sum()
            neg = -y[y < 0].sum()
            assert pos <= c * neg + 1e-9

    def test_search_attains_bound_when_feasible(self):
        # few rows relative to d: some direction makes Gx entrywise
        # nonnegative, and there the ratio hits c exactly
        inst = gen_mu_instance(10, 5, 2.0, RngStream(82, 0))
        cert = certify_mu(inst, 2000, RngStream(82, 1))
        assert cert.upper_bound == 2.0
        assert cert.empirical_lower == 2.0

    def test_search_respects_upper_on_hard_geometry(self):
        inst = gen_mu_instance(40, 5, 2.0, RngStream(82, 0))
        cert = certify_mu(inst, 2000, RngStream(82, 1))
        assert cert.upper_bound == 2.0
        assert cert.empirical_lower <= 2.0 + 1e-9
        # strictly certifies asymmetry even when the cap is out of reach
        assert cert.empirical_lower >= 1.25
        assert cert.witness is not None
        ratio_at_witness = _ratio(inst.A, cert.witness)
        assert ratio_at_witness == pytest.approx(cert.empirical_lower, rel=1e-12)

    def test_unbounded_direction_signals_inf(self):
        # single all-positive column: (Ax)- = 0 for x > 0
        A = np.abs(np.random.default_rng(6).standard_normal((15, 1))) + 0.1
        inst = RegressionInstance(A=A, b=np.zeros(15), meta={})
        cert = certify_mu(inst, 50, RngStream(83, 0))
        assert math.isinf(cert.empirical_lower)
        assert cert.upper_bound is None

    def test_zero_direction_ratio(self):
        from sketchreg.losses import _mu_ratio

        A = np.random.default_rng(7).standard_normal((5, 2))
        assert _mu_ratio(A, np.zeros(2)) == 0.0


def _ratio(A, x):
    y = A @ x
    pos = float(y[y > 0].sum())
    neg = float(-y[y < 0].sum())
    return math.inf if neg == 0 else pos / neg


class TestLowerBoundInequality:
    def test_fnorm_lower_bound_on_certified_instance(self):
        """sum f(r) >= (n + ||r||_1)/(C(f) mu) on mu-certified instances,
        for both built-in hinge-like losses."""
        inst = gen_mu_instance(50, 6, 2.0, RngStream(84, 0))
        n = inst.A.shape[0]
        g = np.random.default_rng(8)
        for f in (HingeLikeLoss.logistic(), HingeLikeLoss.hinge()):
            C = f.hinge_constant
            mu = inst.meta["mu_upper"]
            for scale in (1e-3, 1.0, 1e3):
                for _ in range(200):
                    r = inst.A @ (scale * g.standard_normal(6))
                    assert f_norm(r, f) >= (n + lp_norm(r, 1.0)) / (C * mu)
