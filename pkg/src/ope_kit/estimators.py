"""Policy-value estimators for logged contextual-bandit feedback.

Six estimators share one calling convention: logged data, a target-policy
matrix, and (where a reward model participates) a prediction matrix.
``nw`` regresses target-weighted rewards on behavior probabilities with a
penalized spline and averages the fitted curve over every arm; ``mnw`` does
the same on reward-model residuals and adds the modeled component back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MissingFullPropensities,
    ShapeMismatch,
    ZeroPropensity,
    ZeroWeightMass,
)
from .spline import SplineSpec, fit_pspline, predict

PROPENSITY_FLOOR = 1e-6
_ROW_SUM_TOL = 1e-8


def floor_propensities(matrix: np.ndarray, floor: float = PROPENSITY_FLOOR) -> np.ndarray:
    """Clip entries up to ``floor`` and renormalize each row to sum 1."""
    p = np.clip(np.asarray(matrix, dtype=float), floor, None)
    return p / p.sum(axis=1, keepdims=True)


def _check_rows_sum_to_one(matrix: np.ndarray, what: str) -> None:
    sums = matrix.sum(axis=1)
    worst = float(np.max(np.abs(sums - 1.0))) if matrix.size else 0.0
    if worst > _ROW_SUM_TOL:
        raise ValueError(f"{what} rows must sum to 1 (max deviation {worst:.3g})")


@dataclass(frozen=True, eq=False)
class PolicyMatrix:
    """Target-policy probabilities, one row per unit, one column per arm."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ShapeMismatch("policy probabilities must be a 2-d matrix")
        if not np.all(np.isfinite(p)) or np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError("policy probabilities must lie in [0, 1]")
        _check_rows_sum_to_one(p, "policy")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    @staticmethod
    def uniform(n: int, n_actions: int) -> "PolicyMatrix":
        return PolicyMatrix(np.full((n, n_actions), 1.0 / n_actions))

    @staticmethod
    def one_hot(actions, n_actions: int) -> "PolicyMatrix":
        a = np.asarray(actions, dtype=np.intp)
        probs = np.zeros((a.size, n_actions))
        probs[np.arange(a.size), a] = 1.0
        return PolicyMatrix(probs)


@dataclass(frozen=True, eq=False)
class RewardPredictions:
    """Model-predicted expected rewards for every unit and arm."""

    mu_hat: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu_hat, dtype=float)
        if mu.ndim != 2:
            raise ShapeMismatch("reward predictions must be a 2-d matrix")
        if not np.all(np.isfinite(mu)):
            raise ValueError("reward predictions must be finite")
        mu.setflags(write=False)
        object.__setattr__(self, "mu_hat", mu)


@dataclass(frozen=True, eq=False)
class LoggedBanditData:
    """Logged bandit feedback: chosen arms, observed rewards, behavior probabilities.

    ``propensities`` holds the full per-arm behavior matrix used for
    estimation (true, perturbed, or estimated); rows are floored at
    ``PROPENSITY_FLOOR`` and renormalized at construction.  Datasets that
    only recorded the chosen arm's probability can be built with
    :meth:`from_chosen_propensity`; those support ``ipw``/``sw``/``dr``/``dm``
    but not the all-arm spline estimators.
    """

    chosen_action: np.ndarray
    observed_reward: np.ndarray
    propensities: np.ndarray | None
    features: np.ndarray | None = None
    n_actions: int | None = None
    chosen_propensity: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        actions = np.asarray(self.chosen_action, dtype=np.intp)
        rewards = np.asarray(self.observed_reward, dtype=float)
        if actions.ndim != 1 or rewards.ndim != 1 or actions.size != rewards.size:
            raise ShapeMismatch("chosen_action and observed_reward must be equal-length vectors")
        if actions.size == 0:
            raise ShapeMismatch("logged data must contain at least one unit")
        if not np.all(np.isfinite(rewards)):
            raise ValueError("observed rewards must be finite")

        if self.propensities is not None:
            p = np.asarray(self.propensities, dtype=float)
            if p.ndim != 2 or p.shape[0] != actions.size:
                raise ShapeMismatch("propensities must be an n-by-K matrix")
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise ValueError("propensities must be finite and nonnegative")
            _check_rows_sum_to_one(p, "propensity")
            p = floor_propensities(p)
            p.setflags(write=False)
            k = p.shape[1]
            if np.any(actions < 0) or np.any(actions >= k):
                raise ValueError("chosen actions out of range")
            chosen = p[np.arange(actions.size), actions]
        else:
            if self.n_actions is None or self.chosen_propensity is None:
                raise ShapeMismatch(
                    "logged-only data needs n_actions and chosen_propensity"
                )
            k = int(self.n_actions)
            chosen = np.asarray(self.chosen_propensity, dtype=float)
            if chosen.shape != actions.shape:
                raise ShapeMismatch("chosen_propensity must match chosen_action in length")
            if np.any(chosen <= 0) or np.any(chosen > 1 + 1e-12):
                raise ZeroPropensity("chosen propensities must lie in (0, 1]")
            chosen = np.clip(chosen, PROPENSITY_FLOOR, 1.0)
            p = None
        if k < 2:
            raise ShapeMismatch("need at least two arms")
        if np.any(actions < 0) or np.any(actions >= k):
            raise ValueError("chosen actions out of range")

        chosen = np.asarray(chosen, dtype=float)
        chosen.setflags(write=False)
        actions.setflags(write=False)
        rewards.setflags(write=False)
        object.__setattr__(self, "chosen_action", actions)
        object.__setattr__(self, "observed_reward", rewards)
        object.__setattr__(self, "propensities", p)
        object.__setattr__(self, "n_actions", k)
        object.__setattr__(self, "chosen_propensity", chosen)
        if self.features is not None:
            feats = np.asarray(self.features, dtype=float)
            if feats.ndim != 2 or feats.shape[0] != actions.size:
                raise ShapeMismatch("features must have one row per unit")
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)

    @classmethod
    def from_chosen_propensity(
        cls, chosen_action, observed_reward, chosen_propensity, n_actions, features=None
    ) -> "LoggedBanditData":
        return cls(
            chosen_action=chosen_action,
            observed_reward=observed_reward,
            propensities=None,
            features=features,
            n_actions=n_actions,
            chosen_propensity=np.asarray(chosen_propensity, dtype=float),
        )

    @property
    def n(self) -> int:
        return self.chosen_action.size

    @property
    def K(self) -> int:
        return int(self.n_actions)


@dataclass(frozen=True)
class EstimateResult:
    """A single policy-value estimate with optional fitting diagnostics.

    Diagnostics are advisory and excluded from any equality semantics.
    """

    estimator: str
    value: float
    diagnostics: dict | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"{self.estimator} produced a non-finite estimate")


def _check_policy(data: LoggedBanditData, policy: PolicyMatrix) -> None:
    if policy.probs.shape != (data.n, data.K):
        raise ShapeMismatch(
            f"policy shape {policy.probs.shape} does not match data ({data.n}, {data.K})"
        )


def _check_mu(data: LoggedBanditData, mu: RewardPredictions) -> None:
    if mu.mu_hat.shape != (data.n, data.K):
        raise ShapeMismatch(
            f"reward predictions shape {mu.mu_hat.shape} does not match data ({data.n}, {data.K})"
        )


def _chosen(policy_or_mu: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return policy_or_mu[np.arange(actions.size), actions]


def dm(data: LoggedBanditData, policy: PolicyMatrix, mu: RewardPredictions) -> EstimateResult:
    """Direct method: average the model-predicted reward under the target policy."""
    _check_policy(data, policy)
    _check_mu(data, mu)
    value = float(np.mean(np.sum(policy.probs * mu.mu_hat, axis=1)))
    return EstimateResult("dm", value)


def ipw(data: LoggedBanditData, policy: PolicyMatrix) -> EstimateResult:
    """Inverse probability weighting: reweight logged rewards by pi/p."""
    _check_policy(data, policy)
    p = data.chosen_propensity
    if np.any(p <= 0):
        raise ZeroPropensity("chosen propensities must be positive")
    w = _chosen(policy.probs, data.chosen_action) / p
    value = float(np.mean(w * data.observed_reward))
    return EstimateResult("ipw", value)


def sw(data: LoggedBanditData, policy: PolicyMatrix, normalized: bool = True) -> EstimateResult:
    """Simple weighting: a propensity-blind weighted mean of logged rewards.

    The default self-normalizes by the total target-policy weight; pass
    ``normalized=False`` for the plain average ``mean(pi * r)``.
    """
    _check_policy(data, policy)
    w = _chosen(policy.probs, data.chosen_action)
    if not normalized:
        return EstimateResult("sw", float(np.mean(w * data.observed_reward)))
    total = float(np.sum(w))
    if total <= 0:
        raise ZeroWeightMass("target policy puts zero mass on every logged action")
    value = float(np.sum(w * data.observed_reward) / total)
    return EstimateResult("sw", value)


def dr(data: LoggedBanditData, policy: PolicyMatrix, mu: RewardPredictions) -> EstimateResult:
    """Doubly robust: direct method plus an importance-weighted residual correction."""
    _check_policy(data, policy)
    _check_mu(data, mu)
    p = data.chosen_propensity
    if np.any(p <= 0):
        raise ZeroPropensity("chosen propensities must be positive")
    pi_chosen = _chosen(policy.probs, data.chosen_action)
    mu_chosen = _chosen(mu.mu_hat, data.chosen_action)
    correction = pi_chosen * (data.observed_reward - mu_chosen) / p
    model_part = np.sum(policy.probs * mu.mu_hat, axis=1)
    return EstimateResult("dr", float(np.mean(correction + model_part)))


def _require_full_propensities(data: LoggedBanditData, name: str) -> np.ndarray:
    if data.propensities is None:
        raise MissingFullPropensities(
            f"{name} evaluates the fitted curve at every arm's behavior probability; "
            "this dataset recorded only the chosen arm's propensity"
        )
    return data.propensities


def nw(
    data: LoggedBanditData, policy: PolicyMatrix, spec: SplineSpec | None = None
) -> EstimateResult:
    """Nonparametric weighting: spline-smooth ``pi * r`` against the chosen
    arm's behavior probability, then average the fitted curve over all arms.
    """
    _check_policy(data, policy)
    props = _require_full_propensities(data, "nw")
    responses = _chosen(policy.probs, data.chosen_action) * data.observed_reward
    fit = fit_pspline(data.chosen_propensity, responses, spec)
    curve = predict(fit, props.ravel()).reshape(props.shape)
    value = float(np.mean(curve.sum(axis=1)))
    n = data.n
    diagnostics = {
        "lambda": fit.lam,
        "edf": fit.edf,
        "residual_scale": math.sqrt(fit.rss / max(n - fit.edf, 1.0)),
    }
    return EstimateResult("nw", value, diagnostics)


def mnw(
    data: LoggedBanditData,
    policy: PolicyMatrix,
    mu: RewardPredictions,
    spec: SplineSpec | None = None,
) -> EstimateResult:
    """Model-assisted nonparametric weighting: spline-smooth the target-weighted
    reward-model residuals against behavior probability, add back the modeled
    component, and average over all arms.

    The residual smoother runs its own smoothing-weight selection,
    independent of any plain ``nw`` fit.
    """
    _check_policy(data, policy)
    _check_mu(data, mu)
    props = _require_full_propensities(data, "mnw")
    pi_chosen = _chosen(policy.probs, data.chosen_action)
    mu_chosen = _chosen(mu.mu_hat, data.chosen_action)
    residuals = pi_chosen * (data.observed_reward - mu_chosen)
    fit = fit_pspline(data.chosen_propensity, residuals, spec)
    curve = predict(fit, props.ravel()).reshape(props.shape)
    model_part = np.sum(policy.probs * mu.mu_hat, axis=1)
    value = float(np.mean(curve.sum(axis=1) + model_part))
    n = data.n
    diagnostics = {
        "lambda": fit.lam,
        "edf": fit.edf,
        "residual_scale": math.sqrt(fit.rss / max(n - fit.edf, 1.0)),
    }
    return EstimateResult("mnw", value, diagnostics)
