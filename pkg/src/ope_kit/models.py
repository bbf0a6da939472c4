"""Linear learners for the classification-to-bandit protocol.

A multinomial logistic classifier supplies the target policy (and, in the
estimated-logging mode, the behavior-policy estimate); per-action ridge
regressions supply the reward model.  Both standardize features with
training statistics stored on the model, and both leave intercepts
unpenalized.  Fitting is deterministic full-batch, so repeated runs agree
bitwise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NonConvergenceWarning, ShapeMismatch, SingularSystem
from .estimators import PolicyMatrix, RewardPredictions

_SCALE_EPS = 1e-12
_DROPPED_SCORE_GAP = 30.0


def _standardize_stats(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale < _SCALE_EPS, 1.0, scale)
    return mean, scale


def _augment(features: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    standardized = (features - mean) / scale
    return np.hstack([np.ones((features.shape[0], 1)), standardized])


@dataclass(frozen=True, eq=False)
class Classifier:
    """Fitted multinomial logistic model: per-class linear scores with intercept."""

    weights: np.ndarray
    n_classes: int
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    converged: bool
    dropped_classes: tuple[int, ...]
    loss_path: np.ndarray


@dataclass(frozen=True, eq=False)
class RidgeModel:
    """Per-action affine reward predictors sharing one feature standardization."""

    weights: np.ndarray  # (d + 1, K); row 0 is the intercept
    regularization: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray


def _nll_and_grad(flat_w, design, labels, n_classes, l2):
    w = flat_w.reshape(n_classes, design.shape[1])
    scores = design @ w.T
    scores -= scores.max(axis=1, keepdims=True)
    exp_scores = np.exp(scores)
    totals = exp_scores.sum(axis=1)
    probs = exp_scores / totals[:, None]
    idx = np.arange(labels.size)
    nll = -float(np.sum(scores[idx, labels] - np.log(totals)))
    nll += 0.5 * l2 * float(np.sum(w[:, 1:] ** 2))
    resid = probs
    resid[idx, labels] -= 1.0
    grad = resid.T @ design
    grad[:, 1:] += l2 * w[:, 1:]
    return nll, grad.ravel()


def fit_multinomial_logistic(
    features,
    labels,
    l2: float = 1.0,
    n_classes: int | None = None,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> Classifier:
    """Fit an l2-penalized multinomial logistic regression.

    Deterministic full-batch quasi-Newton minimization runs until the
    projected gradient drops below ``tol`` or ``max_iter`` iterations pass;
    stopping at the cap sets ``converged=False`` and emits a
    :class:`NonConvergenceWarning`.  Classes absent from ``labels`` are
    dropped from the optimization and reattached with strongly negative
    scores, recorded in ``dropped_classes``.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.intp)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
        raise ShapeMismatch("features must be n-by-d with one label per row")
    if l2 <= 0:
        raise ValueError("l2 must be positive")
    k = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError("labels out of range")

    mean, scale = _standardize_stats(x)
    design = _augment(x, mean, scale)

    present = np.unique(y)
    dropped = tuple(int(c) for c in range(k) if c not in set(present.tolist()))
    remap = -np.ones(k, dtype=np.intp)
    remap[present] = np.arange(present.size)
    y_compact = remap[y]
    kp = present.size

    losses: list[float] = []

    def record(flat_w):
        val, _ = _nll_and_grad(flat_w, design, y_compact, kp, l2)
        losses.append(val)

    w0 = np.zeros(kp * design.shape[1])
    record(w0)
    result = minimize(
        _nll_and_grad,
        w0,
        args=(design, y_compact, kp, l2),
        method="L-BFGS-B",
        jac=True,
        callback=record,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-14},
    )
    grad_inf = float(np.max(np.abs(result.jac))) if result.jac is not None else np.inf
    converged = bool(result.success) or grad_inf <= tol
    if not converged:
        warnings.warn(
            f"logistic fit stopped after {result.nit} iterations "
            f"(max |gradient| {grad_inf:.2e} > {tol:g})",
            NonConvergenceWarning,
        )

    w_compact = result.x.reshape(kp, design.shape[1])
    weights = np.zeros((k, design.shape[1]))
    weights[present] = w_compact
    if dropped:
        floor_intercept = float(w_compact[:, 0].min()) - _DROPPED_SCORE_GAP
        for c in dropped:
            weights[c, 0] = floor_intercept
    return Classifier(
        weights=weights,
        n_classes=k,
        feature_mean=mean,
        feature_scale=scale,
        converged=converged,
        dropped_classes=dropped,
        loss_path=np.asarray(losses),
    )


def predict_scores(model: Classifier, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    design = _augment(x, model.feature_mean, model.feature_scale)
    return design @ model.weights.T


def predict_proba(model: Classifier, features) -> np.ndarray:
    """Softmax class probabilities; rows sum to 1 and are strictly positive."""
    scores = predict_scores(model, features)
    scores -= scores.max(axis=1, keepdims=True)
    exp_scores = np.exp(scores)
    return exp_scores / exp_scores.sum(axis=1, keepdims=True)


def to_deterministic_policy(model: Classifier, features) -> PolicyMatrix:
    """One-hot policy at the argmax score; ties break toward the lowest class."""
    scores = predict_scores(model, features)
    return PolicyMatrix.one_hot(np.argmax(scores, axis=1), model.n_classes)


def fit_ridge_per_action(features, losses, l2: float = 1.0) -> RidgeModel:
    """Per-action ridge regression of the full loss matrix on the features.

    Solves ``(X'X + l2 * I) w = X' losses[:, a]`` for every action at once,
    with the intercept column left unpenalized.
    """
    x = np.asarray(features, dtype=float)
    targets = np.asarray(losses, dtype=float)
    if x.ndim != 2 or targets.ndim != 2 or x.shape[0] != targets.shape[0]:
        raise ShapeMismatch("features and losses must share their row count")
    if x.shape[0] < 2:
        raise ShapeMismatch("need at least two rows to fit the reward model")
    if l2 <= 0:
        raise ValueError("l2 must be positive")
    mean, scale = _standardize_stats(x)
    design = _augment(x, mean, scale)
    gram = design.T @ design
    penalty = np.full(design.shape[1], l2)
    penalty[0] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    try:
        weights = np.linalg.solve(gram, design.T @ targets)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("ridge normal equations are singular") from exc
    return RidgeModel(
        weights=weights, regularization=float(l2), feature_mean=mean, feature_scale=scale
    )


def predict_rewards(model: RidgeModel, features) -> RewardPredictions:
    x = np.asarray(features, dtype=float)
    design = _augment(x, model.feature_mean, model.feature_scale)
    return RewardPredictions(design @ model.weights)
