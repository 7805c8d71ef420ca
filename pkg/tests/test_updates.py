import logging

import numpy as np
import pytest
from scipy.special import logit

from gmr.lib.algorithm.likelihood import response_loss
from gmr.lib.algorithm.scaling import (
    apply_quantification,
    build_indicator,
    rescale_quantification,
)
from gmr.lib.algorithm.updates import (
    THRESHOLD_GAP,
    expand_thresholds,
    initial_thresholds,
    update_B,
    update_intercepts,
    update_quantification,
    update_sigma2,
    update_thresholds,
    update_V,
)
from gmr.lib.errors import DegenerateSVD, EmptyCategory, SingularSystem


def _orthonormal(rng, rows, cols):
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q


class TestUpdateB:
    def test_ols(self, rng):
        Phi = rng.standard_normal((30, 3))
        Z = rng.standard_normal((30, 3))
        B = update_B(Z, Phi, np.eye(3), np.zeros((3, 3)), kappa=0.7)
        np.testing.assert_allclose(B, np.linalg.lstsq(Phi, Z, rcond=None)[0], atol=1e-10)

    def test_ridge(self, rng):
        Phi = rng.standard_normal((30, 4))
        Z = rng.standard_normal((30, 2))
        kappa, lam = 0.5, 0.8
        B = update_B(Z, Phi, np.eye(2), np.full((4, 2), lam), kappa)
        expected = np.linalg.solve(Phi.T @ Phi + (2 * lam / kappa) * np.eye(4), Phi.T @ Z)
        np.testing.assert_allclose(B, expected, atol=1e-10)

    @pytest.mark.parametrize("S", [1, 2])
    def test_matches_kronecker_quadratic(self, rng, S):
        P, R, N = 3, 2, 12
        Phi = rng.standard_normal((N, P))
        Z = rng.standard_normal((N, R))
        V = _orthonormal(rng, R, S)
        D = rng.uniform(0.0, 1.0, (P, S))
        kappa = 0.8
        H = np.kron(V, Phi)
        z = Z.ravel(order="F")
        d = D.ravel(order="F")
        b = np.linalg.solve(kappa * H.T @ H + 2 * np.diag(d), kappa * H.T @ z)
        B = update_B(Z, Phi, V, D, kappa)
        np.testing.assert_allclose(B.ravel(order="F"), b, atol=1e-10)

    def test_conjugate_gradients_agree(self, rng):
        Phi = rng.standard_normal((40, 6))
        Z = rng.standard_normal((40, 3))
        V = _orthonormal(rng, 3, 2)
        D = rng.uniform(0.01, 0.5, (6, 2))
        dense = update_B(Z, Phi, V, D, 1.0)
        iterative = update_B(Z, Phi, V, D, 1.0, dense_limit=0)
        np.testing.assert_allclose(iterative, dense, atol=1e-8)

    def test_singular_without_ridge(self, rng):
        Phi = np.column_stack([rng.standard_normal(10), np.zeros(10)])
        with pytest.raises(SingularSystem):
            update_B(rng.standard_normal((10, 1)), Phi, np.ones((1, 1)), np.zeros((2, 1)), 1.0)


class TestUpdateV:
    def test_orthonormal_and_optimal(self, rng):
        Phi = rng.standard_normal((25, 4))
        Z = rng.standard_normal((25, 3))
        B = rng.standard_normal((4, 2))
        V = update_V(Z, Phi, B)
        np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-12)
        best = np.linalg.norm(Z - Phi @ B @ V.T) ** 2
        for _ in range(300):
            other = _orthonormal(rng, 3, 2)
            assert best <= np.linalg.norm(Z - Phi @ B @ other.T) ** 2 + 1e-9

    def test_zero_coefficients(self, rng):
        with pytest.raises(DegenerateSVD):
            update_V(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)), np.zeros((3, 1)))


class TestUpdateIntercepts:
    def test_means(self, rng):
        Z = rng.standard_normal((20, 3))
        m = update_intercepts(Z, ["numeric", "binary", "numeric"])
        np.testing.assert_allclose(m, Z.mean(axis=0))

    def test_constant_and_ordinal(self):
        Z = np.column_stack([np.full(4, 2.5), np.arange(4.0)])
        np.testing.assert_allclose(update_intercepts(Z, ["numeric", "ordinal"]), [2.5, 0.0])


class TestUpdateSigma2:
    def test_formula(self):
        assert update_sigma2(np.array([[1.0], [-1.0], [0.0]])) == pytest.approx(1.0)

    def test_floor(self):
        assert update_sigma2(np.zeros((4, 2))) == pytest.approx(1e-8)


class TestUpdateQuantification:
    def test_group_means(self, rng):
        codes = np.array([1, 1, 2, 2, 2, 3, 3, 1, 3, 2])
        indicator = build_indicator(codes, 3)
        current = rescale_quantification([0.0, 1.0, 2.0], indicator)
        Phi = apply_quantification(indicator, current)[:, None]
        Z = rng.standard_normal((10, 1))
        updated = update_quantification(Z, Phi, np.ones((1, 1)), 0, indicator, current)
        means = np.array([Z[codes == c, 0].mean() for c in (1, 2, 3)])
        np.testing.assert_allclose(updated.w, rescale_quantification(means, indicator).w)

    def test_monotone_for_ordinal(self, rng):
        codes = np.repeat([1, 2, 3, 4], 5)
        indicator = build_indicator(codes, 4)
        current = rescale_quantification([1.0, 2.0, 3.0, 4.0], indicator, "ordinal")
        Phi = apply_quantification(indicator, current)[:, None]
        Z = (np.array([0.0, 2.0, 1.0, 3.0])[codes - 1] + 0.01 * rng.standard_normal(20))[:, None]
        updated = update_quantification(Z, Phi, np.ones((1, 1)), 0, indicator, current)
        assert np.all(np.diff(updated.w) >= -1e-12)
        np.testing.assert_allclose(updated.w[1], updated.w[2])

    def test_least_squares_oracle(self, rng):
        # with fixed norm the optimum is the normalized unconstrained fit
        N, R = 30, 2
        codes = rng.integers(1, 4, N)
        codes[:3] = [1, 2, 3]
        indicator = build_indicator(codes, 3)
        current = rescale_quantification(rng.standard_normal(3), indicator)
        other = rng.standard_normal(N)
        Phi = np.column_stack([other, apply_quantification(indicator, current)])
        A = rng.standard_normal((2, R))
        Z = rng.standard_normal((N, R))
        updated = update_quantification(Z, Phi, A, 1, indicator, current)

        design = np.kron(A[1][:, None], indicator.G)
        target = (Z - np.outer(other, A[0])).ravel(order="F")
        w = np.linalg.lstsq(design, target, rcond=None)[0]
        np.testing.assert_allclose(updated.w, rescale_quantification(w, indicator).w, atol=1e-10)

    def test_zero_row_keeps_current(self, rng):
        indicator = build_indicator(np.array([1, 2, 1, 2]), 2)
        current = rescale_quantification([0.0, 1.0], indicator)
        Phi = apply_quantification(indicator, current)[:, None]
        assert update_quantification(rng.standard_normal((4, 1)), Phi, np.zeros((1, 1)), 0, indicator, current) is None


class TestThresholds:
    def test_balanced_binary(self):
        t = update_thresholds(np.array([1, 2] * 20), np.zeros(40), 2)
        np.testing.assert_allclose(t, [0.0], atol=1e-5)

    def test_constant_theta_closed_form(self):
        y = np.repeat([1, 2, 3, 4], [10, 25, 5, 20])
        theta = np.full(y.shape[0], 0.4)
        cumulative = np.cumsum([10, 25, 5]) / 60.0
        t = update_thresholds(y, theta, 4)
        np.testing.assert_allclose(t, logit(cumulative) + 0.4, atol=1e-4)
        np.testing.assert_allclose(initial_thresholds(y, 4), logit(cumulative), atol=1e-12)

    def test_never_increases_loss(self, rng):
        y = rng.integers(1, 5, 80)
        theta = rng.standard_normal(80)
        current = np.array([-1.0, 0.5, 1.0])
        t = update_thresholds(y, theta, 4, current=current)
        assert response_loss("ordinal", y, theta, thresholds=t) <= response_loss(
            "ordinal", y, theta, thresholds=current
        )

    def test_empty_category_is_merged(self, caplog):
        y = np.array([1, 1, 3, 3, 3, 1, 3, 1])
        with caplog.at_level(logging.WARNING):
            t = update_thresholds(y, np.zeros(8), 3)
        assert "empty" in caplog.text
        assert t.shape == (2,)
        assert np.all(np.diff(t) > 0)
        np.testing.assert_allclose(np.diff(t), THRESHOLD_GAP)

    def test_single_category(self):
        with pytest.raises(EmptyCategory):
            update_thresholds(np.ones(5, dtype=int), np.zeros(5), 3)

    def test_expand_keeps_order(self):
        t = expand_thresholds(np.array([-1.0, 1.0]), np.array([True, False, True, False, True]))
        assert t.shape == (4,)
        assert np.all(np.diff(t) > 0)
