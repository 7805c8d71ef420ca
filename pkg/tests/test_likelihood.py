import numpy as np
import pytest
from scipy.special import expit

from gmr.lib.algorithm.likelihood import (
    PROBABILITY_FLOOR,
    ResponseFamilyParams,
    canonical_params,
    loss_gradient,
    majorization_constant,
    ordinal_category_probs,
    predict_ordinal_category,
    response_loss,
    working_response,
)
from gmr.lib.errors import DimensionMismatch, InvalidFamily

WORKED_VALUES = np.array([0.80, 5.03, 0.32, -1.81, 0.13, 0.15, -0.22])
WORKED_COEFFICIENTS = np.array([0.09, -0.27, 0.04, 0.00, 0.05, -0.01, 0.05])
WORKED_THRESHOLDS = np.array([-5.10, -4.63, -3.39, -2.40, 0.09, 3.05])


def _draw_instance(rng, kind):
    """
    One random observation with random family parameters.
    """
    if kind == "numeric":
        return rng.normal(0.0, 2.0), {"sigma2": rng.uniform(0.2, 3.0)}
    if kind == "binary":
        return float(rng.integers(0, 2)), {}
    n_categories = int(rng.integers(2, 8))
    thresholds = rng.uniform(-3.0, 0.0) + np.cumsum(rng.uniform(0.3, 2.0, n_categories - 1))
    return int(rng.integers(1, n_categories + 1)), {"thresholds": thresholds}


class TestCanonicalParams:
    def test_zero(self, rng):
        Theta = canonical_params(rng.standard_normal((4, 3)), np.zeros((3, 2)), np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(Theta, np.zeros((4, 2)))

    def test_matches_loop(self, rng):
        Phi = rng.standard_normal((5, 3))
        B = rng.standard_normal((3, 2))
        V = rng.standard_normal((4, 2))
        m = rng.standard_normal(4)
        expected = np.empty((5, 4))
        for i in range(5):
            for r in range(4):
                expected[i, r] = m[r] + sum(
                    Phi[i, p] * B[p, s] * V[r, s] for p in range(3) for s in range(2)
                )
        np.testing.assert_allclose(canonical_params(Phi, B, V, m), expected)

    def test_worked_row(self):
        theta = canonical_params(
            WORKED_VALUES[None, :], WORKED_COEFFICIENTS[:, None], np.ones((1, 1)), np.zeros(1)
        )
        np.testing.assert_allclose(theta[0, 0], -1.2793, atol=1e-10)
        assert abs(theta[0, 0] - (-1.27)) < 0.01

    def test_shapes_checked(self):
        with pytest.raises(DimensionMismatch):
            canonical_params(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 1)), np.zeros(1))


class TestResponseLoss:
    def test_numeric_perfect_fit(self):
        y = np.array([0.3, -1.0, 2.0])
        expected = 3 * np.log(np.sqrt(2 * np.pi))
        np.testing.assert_allclose(response_loss("numeric", y, y, sigma2=1.0), expected)

    def test_binary_at_zero(self):
        np.testing.assert_allclose(response_loss("binary", [1.0], [0.0]), np.log(2.0))

    def test_ordinal_middle_category(self):
        loss = response_loss("ordinal", [2], [0.0], thresholds=[-1.0, 1.0])
        np.testing.assert_allclose(loss, -np.log(expit(1.0) - expit(-1.0)))
        np.testing.assert_allclose(loss, 0.7719, atol=1e-4)

    def test_ordinal_extreme_theta_finite(self):
        loss = response_loss("ordinal", [1, 3], [200.0, -200.0], thresholds=[-1.0, 1.0])
        assert np.isfinite(loss)

    def test_family_checks(self):
        with pytest.raises(InvalidFamily):
            response_loss("numeric", [1.0], [1.0], sigma2=0.0)
        with pytest.raises(InvalidFamily):
            response_loss("ordinal", [1], [0.0], thresholds=[1.0, 1.0])
        with pytest.raises(InvalidFamily):
            ResponseFamilyParams(sigma2=1.0).validate(["ordinal"])


class TestGradient:
    def test_examples(self):
        np.testing.assert_allclose(loss_gradient("numeric", [1.5], [1.5], sigma2=2.0), [0.0])
        np.testing.assert_allclose(loss_gradient("binary", [1.0], [0.0]), [-0.5])

    @pytest.mark.parametrize("kind", ["numeric", "binary", "ordinal"])
    def test_finite_differences(self, rng, kind):
        step = 1e-5
        for _ in range(200):
            y, extra = _draw_instance(rng, kind)
            theta = rng.uniform(-5.0, 5.0)
            gradient = loss_gradient(kind, [y], [theta], **extra)[0]
            numeric = (
                response_loss(kind, [y], [theta + step], **extra)
                - response_loss(kind, [y], [theta - step], **extra)
            ) / (2 * step)
            np.testing.assert_allclose(gradient, numeric, rtol=1e-5, atol=1e-8)


class TestMajorization:
    def test_kappa_examples(self):
        assert majorization_constant(["numeric"], 1.0) == 1.0
        assert majorization_constant(["numeric", "binary"], 10.0) == 0.25
        assert majorization_constant(["binary", "ordinal"]) == 0.5

    def test_working_response(self, rng):
        Theta = rng.standard_normal((3, 2))
        np.testing.assert_array_equal(working_response(Theta, np.zeros((3, 2)), 0.5), Theta)
        y = rng.standard_normal(5)
        theta = rng.standard_normal(5)
        z = working_response(theta, loss_gradient("numeric", y, theta, sigma2=1.0), 1.0)
        np.testing.assert_allclose(z, y)

    @pytest.mark.parametrize("kind", ["numeric", "binary", "ordinal"])
    def test_quadratic_bound_holds_and_touches(self, rng, kind):
        for _ in range(1000):
            y, extra = _draw_instance(rng, kind)
            kappa = majorization_constant([kind], extra.get("sigma2"))
            support, theta = rng.uniform(-6.0, 6.0, 2)
            anchor = response_loss(kind, [y], [support], **extra)
            xi = loss_gradient(kind, [y], [support], **extra)
            z = working_response(support, xi, kappa)[0]

            def majorizer(t):
                return anchor - xi[0] ** 2 / (2 * kappa) + 0.5 * kappa * (t - z) ** 2

            assert majorizer(theta) - response_loss(kind, [y], [theta], **extra) >= -1e-10
            assert abs(majorizer(support) - anchor) < 1e-10


class TestOrdinalPrediction:
    def test_probabilities(self):
        np.testing.assert_allclose(ordinal_category_probs(0.0, [0.0]), [0.5, 0.5])
        probs = ordinal_category_probs(np.array([-0.5, 0.3]), [-1.0, 0.0, 2.0])
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert ordinal_category_probs(-50.0, [-1.0, 1.0])[0] > 0.999

    def test_worked_thresholds(self):
        assert predict_ordinal_category(-1.27, WORKED_THRESHOLDS) == 5
        assert np.argmax(ordinal_category_probs(-1.27, WORKED_THRESHOLDS)) + 1 == 5

    def test_boundaries(self):
        assert predict_ordinal_category(-9.0, WORKED_THRESHOLDS) == 1
        assert predict_ordinal_category(0.09, WORKED_THRESHOLDS) == 6
        assert predict_ordinal_category(4.0, WORKED_THRESHOLDS) == 7
        np.testing.assert_array_equal(
            predict_ordinal_category(np.array([-1.0, 1.0]), [0.0]), [1, 2]
        )

    def test_floor_survives_normalization(self):
        probs = ordinal_category_probs(np.array([-80.0, 0.0, 80.0]), [-2.0, -1.0, 1.0, 2.0])
        assert probs.min() >= PROBABILITY_FLOOR
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-14)
