"""A quick built-in property suite for the ``selftest`` subcommand.

Each check prints one PASS/FAIL line.  These mirror the exact-tolerance
invariants of the library; the pytest suite is the full verification.
"""
from __future__ import annotations

import numpy as np

from .estimators import (
    LoggedBanditData,
    PolicyMatrix,
    RewardPredictions,
    dr,
    ipw,
    mnw,
    nw,
)
from .harness import RunConfig, run_monte_carlo
from .spline import SplineSpec, build_knots, eval_basis, fit_pspline, predict


def _random_instance(rng, n=60, k=5):
    props = rng.uniform(0.05, 1.0, size=(n, k))
    props /= props.sum(axis=1, keepdims=True)
    actions = rng.integers(0, k, size=n)
    rewards = rng.normal(size=n)
    pol = rng.uniform(size=(n, k))
    pol /= pol.sum(axis=1, keepdims=True)
    data = LoggedBanditData(
        chosen_action=actions, observed_reward=rewards, propensities=props
    )
    return data, PolicyMatrix(pol)


def _check_partition_of_unity(rng) -> bool:
    x = rng.uniform(size=200)
    knots = build_knots(x, SplineSpec(segments=9))
    grid = np.linspace(knots.lo, knots.hi, 101)
    sums = np.array([eval_basis(knots, 3, v).sum() for v in grid])
    return bool(np.max(np.abs(sums - 1.0)) < 1e-12)


def _check_constant_reproduction(rng) -> bool:
    x = rng.uniform(size=80)
    fit = fit_pspline(x, np.full(80, 2.5))
    return bool(np.max(np.abs(predict(fit, x) - 2.5)) < 1e-8)


def _check_degeneracies(rng) -> bool:
    data, pol = _random_instance(rng)
    zero = RewardPredictions(np.zeros((data.n, data.K)))
    spec = SplineSpec(lambda_fixed=1.0)
    a = abs(dr(data, pol, zero).value - ipw(data, pol).value) < 1e-12
    b = abs(mnw(data, pol, zero, spec).value - nw(data, pol, spec).value) < 1e-12
    return a and b


def _check_ipw_cancellation(rng) -> bool:
    data, _ = _random_instance(rng)
    pol = PolicyMatrix(data.propensities)
    return ipw(data, pol).value == float(np.mean(data.observed_reward))


def _check_reproducibility(seed: int) -> bool:
    config = RunConfig(
        dataset="example1",
        scenario="decreasing",
        n=100,
        n_actions=5,
        mc_iterations=12,
        repetitions=2,
        master_seed=seed,
        estimators=("sw", "ipw", "nw"),
    )
    serial = run_monte_carlo(config)
    import dataclasses

    parallel = run_monte_carlo(dataclasses.replace(config, threads=2))
    return all(
        serial.bias[t] == parallel.bias[t]
        and serial.sd[t] == parallel.sd[t]
        and serial.rmse[t] == parallel.rmse[t]
        for t in config.estimators
    )


def run_selftest(seed: int = 0) -> list[str]:
    """Run every check; returns the names of the failures."""
    rng = np.random.default_rng([seed, 99])
    checks = [
        ("basis partition of unity", lambda: _check_partition_of_unity(rng)),
        ("constant-response reproduction", lambda: _check_constant_reproduction(rng)),
        ("estimator degeneracy identities", lambda: _check_degeneracies(rng)),
        ("weight cancellation at the behavior policy", lambda: _check_ipw_cancellation(rng)),
        ("serial/parallel reproducibility", lambda: _check_reproducibility(seed)),
    ]
    failures = []
    for name, check in checks:
        try:
            ok = check()
        except Exception as exc:  # noqa: BLE001 - report, then keep going
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")
            failures.append(name)
            continue
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        if not ok:
            failures.append(name)
    return failures
