"""Supervised-model tests: logistic optimum checks, ridge oracles, policy shape."""
import numpy as np
import pytest

from ope_kit import (
    NonConvergenceWarning,
    fit_multinomial_logistic,
    fit_ridge_per_action,
    predict_proba,
    predict_rewards,
    predict_scores,
    to_deterministic_policy,
)
from ope_kit.models import _augment, _nll_and_grad, _standardize_stats


def penalized_nll(flat_w, design, labels, n_classes, l2):
    return _nll_and_grad(flat_w, design, labels, n_classes, l2)[0]


def finite_difference_gradient(flat_w, design, labels, n_classes, l2, h=1e-6):
    grad = np.empty_like(flat_w)
    for i in range(flat_w.size):
        up = flat_w.copy()
        down = flat_w.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (
            penalized_nll(up, design, labels, n_classes, l2)
            - penalized_nll(down, design, labels, n_classes, l2)
        ) / (2 * h)
    return grad


class TestLogistic:
    def test_separable_toy_reaches_perfect_accuracy(self):
        features = np.array([[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]])
        labels = np.array([0, 0, 1, 1])
        model = fit_multinomial_logistic(features, labels, l2=0.01)
        predicted = np.argmax(predict_proba(model, features), axis=1)
        np.testing.assert_array_equal(predicted, labels)

    def test_heavy_regularization_shrinks_to_label_frequencies(self):
        rng = np.random.default_rng(0)
        features = rng.normal(size=(300, 4))
        labels = rng.choice(3, size=300, p=(0.5, 0.3, 0.2))
        model = fit_multinomial_logistic(features, labels, l2=1e6)
        probs = predict_proba(model, features)
        freqs = np.bincount(labels, minlength=3) / labels.size
        assert np.max(np.abs(probs - freqs)) <= 0.01

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        features = rng.normal(size=(10, 3))
        labels = rng.integers(0, 3, size=10)
        mean, scale = _standardize_stats(features)
        design = _augment(features, mean, scale)
        for point in (np.zeros(12), rng.normal(scale=0.5, size=12)):
            _, analytic = _nll_and_grad(point, design, labels, 3, 1.0)
            numeric = finite_difference_gradient(point, design, labels, 3, 1.0)
            np.testing.assert_allclose(
                analytic, numeric, rtol=1e-5, atol=1e-5 * (1 + np.abs(numeric).max())
            )

    def test_gradient_near_zero_at_returned_optimum(self):
        rng = np.random.default_rng(2)
        features = rng.normal(size=(10, 3))
        labels = rng.integers(0, 3, size=10)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        design = _augment(features, model.feature_mean, model.feature_scale)
        _, grad = _nll_and_grad(model.weights.ravel(), design, labels, 3, 1.0)
        assert np.max(np.abs(grad)) < 1e-5

    def test_loss_path_nonincreasing(self):
        rng = np.random.default_rng(3)
        features = rng.normal(size=(120, 5))
        labels = rng.integers(0, 4, size=120)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        diffs = np.diff(model.loss_path)
        assert np.all(diffs <= 1e-8 * np.abs(model.loss_path[:-1]) + 1e-10)

    def test_degenerate_labels_dropped_and_flagged(self):
        rng = np.random.default_rng(4)
        features = rng.normal(size=(50, 3))
        labels = rng.integers(0, 2, size=50)  # class 2 absent
        model = fit_multinomial_logistic(features, labels, l2=1.0, n_classes=3)
        assert model.dropped_classes == (2,)
        probs = predict_proba(model, features)
        assert probs.shape == (50, 3)
        assert np.all(probs[:, 2] < 1e-8)
        assert np.all(probs > 0)

    def test_nonconvergence_warns_and_flags(self):
        rng = np.random.default_rng(5)
        features = rng.normal(size=(60, 4))
        labels = rng.integers(0, 3, size=60)
        with pytest.warns(NonConvergenceWarning):
            model = fit_multinomial_logistic(features, labels, l2=1.0, max_iter=2)
        assert not model.converged


class TestPredictProba:
    def test_zero_weights_give_uniform(self):
        rng = np.random.default_rng(6)
        features = rng.normal(size=(30, 4))
        labels = rng.integers(0, 5, size=30)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        zeroed = type(model)(
            weights=np.zeros_like(model.weights),
            n_classes=model.n_classes,
            feature_mean=model.feature_mean,
            feature_scale=model.feature_scale,
            converged=True,
            dropped_classes=(),
            loss_path=model.loss_path,
        )
        np.testing.assert_allclose(predict_proba(zeroed, features), 0.2, atol=1e-12)

    def test_rows_sum_to_one_and_positive(self):
        rng = np.random.default_rng(7)
        features = rng.normal(size=(40, 3))
        labels = rng.integers(0, 4, size=40)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        probs = predict_proba(model, rng.normal(size=(25, 3)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(probs > 0)

    def test_matches_hand_softmax(self):
        from ope_kit.models import Classifier

        model = Classifier(
            weights=np.array([[0.0, 1.0], [0.5, -1.0], [-0.5, 0.0]]),
            n_classes=3,
            feature_mean=np.zeros(1),
            feature_scale=np.ones(1),
            converged=True,
            dropped_classes=(),
            loss_path=np.array([]),
        )
        x = np.array([[2.0]])
        scores = np.array([0.0 + 2.0, 0.5 - 2.0, -0.5 + 0.0])
        expected = np.exp(scores) / np.exp(scores).sum()
        np.testing.assert_allclose(predict_proba(model, x)[0], expected, atol=1e-12)


class TestDeterministicPolicy:
    def test_tie_breaks_to_lowest_class(self):
        from ope_kit.models import Classifier

        model = Classifier(
            weights=np.zeros((4, 3)),
            n_classes=4,
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
            converged=True,
            dropped_classes=(),
            loss_path=np.array([]),
        )
        policy = to_deterministic_policy(model, np.zeros((5, 2)))
        np.testing.assert_array_equal(np.argmax(policy.probs, axis=1), 0)

    def test_invariant_to_score_shifts(self):
        rng = np.random.default_rng(8)
        features = rng.normal(size=(30, 3))
        labels = rng.integers(0, 3, size=30)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        base = to_deterministic_policy(model, features)
        shifted = type(model)(
            weights=model.weights + np.array([5.0, 0.0, 0.0, 0.0]),
            n_classes=model.n_classes,
            feature_mean=model.feature_mean,
            feature_scale=model.feature_scale,
            converged=True,
            dropped_classes=(),
            loss_path=model.loss_path,
        )
        np.testing.assert_array_equal(
            base.probs, to_deterministic_policy(shifted, features).probs
        )

    def test_rows_are_valid_one_hot(self):
        rng = np.random.default_rng(9)
        features = rng.normal(size=(40, 4))
        labels = rng.integers(0, 5, size=40)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        policy = to_deterministic_policy(model, features)
        np.testing.assert_array_equal(policy.probs.sum(axis=1), 1.0)
        assert np.all(np.count_nonzero(policy.probs, axis=1) == 1)


class TestRidge:
    def test_constant_target_absorbed_by_intercept(self):
        rng = np.random.default_rng(10)
        features = rng.normal(size=(50, 4))
        losses = np.full((50, 3), 0.75)
        model = fit_ridge_per_action(features, losses, l2=10.0)
        preds = predict_rewards(model, features).mu_hat
        np.testing.assert_allclose(preds, 0.75, atol=1e-6)

    def test_tiny_regularization_interpolates_linear_target(self):
        rng = np.random.default_rng(11)
        features = rng.normal(size=(40, 3))
        w = np.array([[1.0, -2.0, 0.5], [0.0, 1.0, 1.0]]).T
        losses = features @ w + 0.25
        model = fit_ridge_per_action(features, losses, l2=1e-10)
        preds = predict_rewards(model, features).mu_hat
        np.testing.assert_allclose(preds, losses, atol=1e-6)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(12)
        features = rng.normal(size=(6, 2))
        losses = rng.normal(size=(6, 3))
        l2 = 0.5
        model = fit_ridge_per_action(features, losses, l2=l2)

        mean, scale = _standardize_stats(features)
        design = _augment(features, mean, scale)
        penalty = np.diag([0.0, l2, l2])
        oracle = np.linalg.inv(design.T @ design + penalty) @ (design.T @ losses)
        np.testing.assert_allclose(model.weights, oracle, atol=1e-9)

    def test_normal_equation_residual_small(self):
        rng = np.random.default_rng(13)
        features = rng.normal(size=(80, 5))
        losses = rng.normal(size=(80, 4))
        l2 = 2.0
        model = fit_ridge_per_action(features, losses, l2=l2)
        design = _augment(features, model.feature_mean, model.feature_scale)
        penalty = np.full(design.shape[1], l2)
        penalty[0] = 0.0
        lhs = (design.T @ design + np.diag(penalty)) @ model.weights
        rhs = design.T @ losses
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_predictions_affine_in_features(self):
        from ope_kit.models import RidgeModel

        model = RidgeModel(
            weights=np.array([[1.0], [2.0]]),
            regularization=1.0,
            feature_mean=np.zeros(1),
            feature_scale=np.ones(1),
        )
        preds = predict_rewards(model, np.array([[0.0], [3.0]])).mu_hat
        np.testing.assert_allclose(preds, [[1.0], [7.0]], atol=1e-12)

    def test_intercept_only_model_gives_constant_columns(self):
        from ope_kit.models import RidgeModel

        model = RidgeModel(
            weights=np.array([[2.0, -1.0], [0.0, 0.0], [0.0, 0.0]]),
            regularization=1.0,
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
        )
        preds = predict_rewards(model, np.random.default_rng(14).normal(size=(9, 2)))
        np.testing.assert_allclose(preds.mu_hat[:, 0], 2.0, atol=1e-12)
        np.testing.assert_allclose(preds.mu_hat[:, 1], -1.0, atol=1e-12)

    def test_zero_coefficients_give_zero_matrix(self):
        from ope_kit.models import RidgeModel

        model = RidgeModel(
            weights=np.zeros((3, 2)),
            regularization=1.0,
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
        )
        preds = predict_rewards(model, np.ones((4, 2)))
        np.testing.assert_array_equal(preds.mu_hat, 0.0)


class TestScoressShape:
    def test_scores_shape(self):
        rng = np.random.default_rng(15)
        features = rng.normal(size=(20, 3))
        labels = rng.integers(0, 4, size=20)
        model = fit_multinomial_logistic(features, labels, l2=1.0)
        assert predict_scores(model, features).shape == (20, 4)
