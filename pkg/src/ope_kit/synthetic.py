"""Synthetic bandit problems with known ground truth.

All generators share one logging mechanism: per context, draw K uniforms,
sort them increasing, and normalize into behavior probabilities, so arm
identity coincides with propensity rank.  Reward tables are rearranged per
scenario to induce positive, negative, or no correlation between rewards
and propensities.  Every generator takes an explicit seeded generator and
is bitwise reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .estimators import LoggedBanditData, PolicyMatrix, RewardPredictions

SCENARIOS = ("increasing", "decreasing", "unsorted")


@dataclass(frozen=True, eq=False)
class SyntheticProblem:
    """One simulated draw: logged data, the full reward table, the target
    policy, and the realized policy value for this draw."""

    data: LoggedBanditData
    full_rewards: np.ndarray
    true_value: float
    scenario: str
    policy: PolicyMatrix


def sorted_uniform_propensities(n: int, n_arms: int, rng: np.random.Generator) -> np.ndarray:
    """Per context: K uniform draws, sorted increasing, normalized to sum 1."""
    u = rng.uniform(size=(n, n_arms))
    u.sort(axis=1)
    return u / u.sum(axis=1, keepdims=True)


def sample_actions(propensities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one arm per row via inverse-CDF sampling with a single uniform."""
    cdf = np.cumsum(propensities, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(propensities.shape[0])
    return (cdf < u[:, None]).sum(axis=1)


def _scenario_order(keys: np.ndarray, scenario: str) -> np.ndarray | None:
    """Column order per row that arranges ``keys`` per the scenario, or None."""
    if scenario == "unsorted":
        return None
    if scenario == "increasing":
        return np.argsort(keys, axis=1)
    if scenario == "decreasing":
        return np.argsort(keys, axis=1)[:, ::-1]
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def _assemble(
    rewards: np.ndarray,
    policy_probs: np.ndarray,
    scenario: str,
    rng: np.random.Generator,
) -> SyntheticProblem:
    n, k = rewards.shape
    propensities = sorted_uniform_propensities(n, k, rng)
    actions = sample_actions(propensities, rng)
    observed = rewards[np.arange(n), actions]
    policy = PolicyMatrix(policy_probs)
    data = LoggedBanditData(
        chosen_action=actions,
        observed_reward=observed,
        propensities=propensities,
    )
    value = float(np.mean(np.sum(policy.probs * rewards, axis=1)))
    return SyntheticProblem(
        data=data,
        full_rewards=rewards,
        true_value=value,
        scenario=scenario,
        policy=policy,
    )


def gen_example1(
    n: int, n_arms: int, scenario: str, rng: np.random.Generator
) -> SyntheticProblem:
    """Squared standard normal rewards, uniform target policy.

    Rewards are sorted per context according to the scenario, aligning (or
    not) with the increasing propensities.
    """
    if n < 1 or n_arms < 2:
        raise ValueError("need n >= 1 and at least two arms")
    rewards = rng.standard_normal((n, n_arms)) ** 2
    order = _scenario_order(rewards, scenario)
    if order is not None:
        rewards = np.take_along_axis(rewards, order, axis=1)
    uniform = np.full((n, n_arms), 1.0 / n_arms)
    return _assemble(rewards, uniform, scenario, rng)


def gen_example2(
    n: int,
    n_arms: int,
    scenario: str,
    beta: float,
    rng: np.random.Generator,
) -> tuple[SyntheticProblem, RewardPredictions]:
    """Two-component rewards ``x^2 + y^2`` with a quadratic baseline model.

    ``x`` has variance 2, ``y`` variance 1; reward columns are rearranged per
    context by the ``y^2`` component, carrying the paired ``x`` values along.
    The returned predictions are ``beta * x^2``: exact at ``beta=1``,
    half-strength at ``beta=0.5``, absent at ``beta=0``.
    """
    if n < 1 or n_arms < 2:
        raise ValueError("need n >= 1 and at least two arms")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    x = rng.normal(0.0, np.sqrt(2.0), size=(n, n_arms))
    y = rng.standard_normal((n, n_arms))
    baseline = x**2
    rewards = baseline + y**2
    order = _scenario_order(y**2, scenario)
    if order is not None:
        rewards = np.take_along_axis(rewards, order, axis=1)
        baseline = np.take_along_axis(baseline, order, axis=1)
    uniform = np.full((n, n_arms), 1.0 / n_arms)
    problem = _assemble(rewards, uniform, scenario, rng)
    return problem, RewardPredictions(beta * baseline)


def gen_toy(
    n: int,
    n_arms: int,
    w: float,
    mu: float,
    sigma: float,
    rng: np.random.Generator,
) -> SyntheticProblem:
    """Constant-mean rewards with a target policy blending the behavior
    policy and the uniform one: ``pi = w * p + (1 - w) / K``.

    The conditional mean of ``pi * r`` given ``p`` is then exactly linear:
    ``(1 - w) * mu / K + w * mu * p``.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rewards = mu + rng.normal(0.0, sigma, size=(n, n_arms))
    propensities = sorted_uniform_propensities(n, n_arms, rng)
    actions = sample_actions(propensities, rng)
    observed = rewards[np.arange(n), actions]
    policy = PolicyMatrix(w * propensities + (1.0 - w) / n_arms)
    data = LoggedBanditData(
        chosen_action=actions,
        observed_reward=observed,
        propensities=propensities,
    )
    value = float(np.mean(np.sum(policy.probs * rewards, axis=1)))
    return SyntheticProblem(
        data=data,
        full_rewards=rewards,
        true_value=value,
        scenario="unsorted",
        policy=policy,
    )


def true_value(problem: SyntheticProblem, policy: PolicyMatrix) -> float:
    """Realized value of ``policy`` on the problem's full reward table."""
    if policy.probs.shape != problem.full_rewards.shape:
        raise ShapeMismatch(
            f"policy shape {policy.probs.shape} does not match rewards "
            f"{problem.full_rewards.shape}"
        )
    return float(np.mean(np.sum(policy.probs * problem.full_rewards, axis=1)))
