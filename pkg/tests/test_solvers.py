import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathmed.errors import MaxIterations
from pathmed.solvers import (BivariateProblem, bivariate_objective, bivariate_prox, bivariate_prox_batch,
                             lasso_column, lasso_gram, lasso_kkt_violation, soft_threshold)

from oracles import bivariate_grid, fista_lasso

coef_b = st.floats(0, 5, allow_nan=False)
curv = st.floats(0.05, 10, allow_nan=False)
lin = st.floats(-10, 10, allow_nan=False)


class TestSoftThreshold:
    @pytest.mark.parametrize("a, b, expected", [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0),
                                                (1.0, 1.0, 0.0), (2.0, 0.0, 2.0)])
    def test_values(self, a, b, expected):
        assert soft_threshold(a, b) == expected

    def test_vectorized(self):
        np.testing.assert_array_equal(soft_threshold(np.array([-2.0, 0.1, 4.0]), 0.5), [-1.5, 0.0, 3.5])

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)


class TestBivariate:
    def test_validation(self):
        with pytest.raises(ValueError):
            BivariateProblem(-1, 0, 1, 1, 0, 0)
        with pytest.raises(ValueError):
            BivariateProblem(0, 0, 0, 1, 0, 0)

    def test_zero_data_gives_origin(self):
        assert bivariate_prox(BivariateProblem(1, 1, 1, 1, 0, 0)) == (0.0, 0.0)

    def test_no_coupling_is_soft_thresholding(self):
        a1, a2 = bivariate_prox(BivariateProblem(0.0, 0.5, 2.0, 4.0, 3.0, -1.0))
        assert a1 == pytest.approx(1.25) and a2 == pytest.approx(-0.125)

    def test_strong_coupling_keeps_one_coordinate(self):
        # the product term makes having both coordinates nonzero expensive
        a1, a2 = bivariate_prox(BivariateProblem(10.0, 0.0, 1.0, 1.0, 3.0, 2.0))
        assert (a1, a2) == pytest.approx((3.0, 0.0))

    def test_batch_matches_scalar(self, rng):
        b = [rng.uniform(0, 3, 200), rng.uniform(0, 1, 200), rng.uniform(0.1, 5, 200),
             rng.uniform(0.1, 5, 200), rng.normal(0, 3, 200), rng.normal(0, 3, 200)]
        o1, o2 = bivariate_prox_batch(*b)
        for i in range(200):
            s = bivariate_prox(BivariateProblem(*(float(c[i]) for c in b)))
            assert (o1[i], o2[i]) == s

    def test_batch_broadcasts_scalars(self):
        o1, o2 = bivariate_prox_batch(1.0, 0.1, 3.0, 3.0, np.array([0.0, 5.0]), np.array([0.0, 5.0]))
        assert o1.shape == (2,) and o1[0] == 0.0

    @given(coef_b, coef_b, curv, curv, lin, lin)
    def test_not_beaten_by_oracle(self, b1, b2, b3, b4, b5, b6):
        b = (b1, b2, b3, b4, b5, b6)
        a1, a2 = bivariate_prox(BivariateProblem(*b))
        g1, g2, gv = bivariate_grid(b, points=101, rounds=5)
        v = bivariate_objective(a1, a2, *b)
        assert v <= gv + 1e-8 * (1 + abs(gv))

    @given(coef_b, coef_b, curv, lin, lin)
    def test_swap_symmetry(self, b1, b2, b3, b5, b6):
        a1, a2 = bivariate_prox(BivariateProblem(b1, b2, b3, b3, b5, b6))
        c1, c2 = bivariate_prox(BivariateProblem(b1, b2, b3, b3, b6, b5))
        v = bivariate_objective(a1, a2, b1, b2, b3, b3, b5, b6)
        w = bivariate_objective(c2, c1, b1, b2, b3, b3, b5, b6)
        assert v == pytest.approx(w, rel=1e-12, abs=1e-12)

    @given(coef_b, coef_b, curv, curv, lin, lin)
    def test_sign_flip_equivariance(self, b1, b2, b3, b4, b5, b6):
        a1, a2 = bivariate_prox(BivariateProblem(b1, b2, b3, b4, b5, b6))
        c1, c2 = bivariate_prox(BivariateProblem(b1, b2, b3, b4, -b5, -b6))
        v = bivariate_objective(a1, a2, b1, b2, b3, b4, b5, b6)
        w = bivariate_objective(-c1, -c2, b1, b2, b3, b4, b5, b6)
        assert v == pytest.approx(w, rel=1e-12, abs=1e-12)


def lasso_instance(rng, n=30, p=6):
    d = rng.normal(size=(n, p))
    r = d @ np.where(rng.uniform(size=p) < 0.5, rng.normal(size=p), 0.0) + rng.normal(size=n)
    return d, r


class TestLasso:
    def test_zero_above_critical_kappa(self, rng):
        d, r = lasso_instance(rng)
        kmax = np.max(np.abs(d.T @ r))
        np.testing.assert_array_equal(lasso_column(r, d, kmax), 0.0)
        assert np.any(lasso_column(r, d, 0.9 * kmax) != 0)

    def test_ols_at_zero_kappa(self, rng):
        d, r = lasso_instance(rng)
        ols = np.linalg.lstsq(d, r, rcond=None)[0]
        np.testing.assert_allclose(lasso_column(r, d, 0.0, tol=1e-13), ols, atol=1e-8)

    def test_max_iterations(self, rng):
        d, r = lasso_instance(rng)
        d[:, 1] = d[:, 0] + 0.01 * d[:, 1]  # near-collinear slows coordinate descent
        with pytest.raises(MaxIterations) as info:
            lasso_column(r, d, 0.01, max_sweeps=1)
        assert info.value.result.shape == (d.shape[1],)

    def test_negative_kappa(self, rng):
        d, r = lasso_instance(rng)
        with pytest.raises(ValueError):
            lasso_column(r, d, -1.0)

    def test_matches_fista(self, rng):
        for _ in range(10):
            d, r = lasso_instance(rng)
            kappa = rng.uniform(0.5, 10)
            np.testing.assert_allclose(lasso_column(r, d, kappa, tol=1e-12), fista_lasso(d, r, kappa), atol=1e-6)

    def test_kkt(self, rng):
        d, r = lasso_instance(rng)
        b = lasso_column(r, d, 2.0)
        assert lasso_kkt_violation(r, d, 2.0, b) < 1e-6
        # an arbitrary point violates the conditions
        assert lasso_kkt_violation(r, d, 2.0, b + 0.1) > 1e-3

    def test_zero_design_column_is_held_at_zero(self, rng):
        d, r = lasso_instance(rng)
        d[:, 2] = 0.0
        b = lasso_column(r, d, 1.0, warm_start=np.ones(d.shape[1]))
        assert b[2] == 0.0

    def test_columns_are_independent(self, rng):
        d = rng.normal(size=(40, 5))
        resp = rng.normal(size=(40, 3))
        joint, _, ok = lasso_gram(d.T @ d, d.T @ resp, 1.5, tol=1e-12)
        assert ok
        for k in range(3):
            np.testing.assert_allclose(joint[:, k], lasso_column(resp[:, k], d, 1.5, tol=1e-12), atol=1e-12)

    def test_warm_start_converges_faster(self, rng):
        d, r = lasso_instance(rng, p=10)
        gram, corr = d.T @ d, d.T @ r
        cold, cold_sweeps, _ = lasso_gram(gram, corr, 1.0)
        _, warm_sweeps, _ = lasso_gram(gram, corr, 1.0, warm_start=cold)
        assert warm_sweeps <= 2 <= cold_sweeps
