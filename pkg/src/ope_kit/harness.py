"""Monte Carlo evaluation protocols for the estimators.

Two modes share one summary format:

* classification mode turns a multi-class dataset into bandit feedback —
  split the data, train a target classifier on one half, treat its error on
  the other half as ground truth, then repeatedly log noisy losses under a
  random behavior policy and score every configured estimator;
* synthetic mode redraws a fully simulated problem each iteration and
  scores the estimators against that draw's realized value.

Every iteration derives its own generator from (master seed, repetition,
iteration), so results are bitwise identical whether the work runs serially
or across processes.  ``OPE_KIT_THREADS`` caps worker parallelism.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaMismatch, ShapeMismatch, SizeTooLarge
from .estimators import (
    LoggedBanditData,
    PolicyMatrix,
    RewardPredictions,
    dm,
    dr,
    floor_propensities,
    ipw,
    mnw,
    nw,
    sw,
)
from .models import (
    fit_multinomial_logistic,
    fit_ridge_per_action,
    predict_proba,
    predict_rewards,
    to_deterministic_policy,
)
from .spline import SplineSpec
from .synthetic import SCENARIOS, gen_example1, gen_example2, sample_actions

SYNTHETIC_DATASETS = ("example1", "example2")
LOGGING_MODES = ("true", "perturbed", "estimated")

_STREAM_REPETITION = 11
_STREAM_ITERATION = 12

_PERTURBATION_SD = 0.3
_PERTURBATION_FACTOR_FLOOR = 0.05
_LOGGING_FIT_FRACTION = 0.75


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class ClassificationData:
    """A loaded multi-class dataset with contiguous 0-based labels."""

    features: np.ndarray
    labels: np.ndarray
    name: str

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=np.intp)
        if feats.ndim != 2 or labs.ndim != 1 or feats.shape[0] != labs.size:
            raise ShapeMismatch("features must be n-by-d with one label per row")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class DatasetSchema:
    """Optional declaration of a dataset file's expected layout."""

    name: str | None = None
    n: int | None = None
    d: int | None = None
    K: int | None = None
    label_column: int = -1
    delimiter: str | None = None

    @classmethod
    def from_json(cls, path) -> "DatasetSchema":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read schema {path}: {exc}") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ParseError(f"unknown schema keys in {path}: {sorted(unknown)}")
        return cls(**raw)


def _split_line(line: str, delimiter: str | None) -> list[str]:
    if delimiter == "whitespace":
        return line.split()
    return [cell.strip() for cell in line.split(delimiter or ",")]


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_dataset(path, schema: DatasetSchema | None = None) -> ClassificationData:
    """Parse a CSV (or whitespace-delimited) file into features and labels.

    The label column (last by default) may hold integers or strings; labels
    are mapped to contiguous 0-based codes by sorted order.  A header row is
    detected by non-numeric feature cells and skipped.  Declared schema
    dimensions are enforced.
    """
    if schema is None:
        schema = DatasetSchema()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read dataset {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path} contains no data rows")

    rows = [_split_line(ln, schema.delimiter) for ln in lines]
    width = len(rows[0])
    label_col = schema.label_column if schema.label_column >= 0 else width + schema.label_column
    if not 0 <= label_col < width:
        raise ParseError(f"label column {schema.label_column} outside row width {width}")
    feature_cols = [c for c in range(width) if c != label_col]

    if any(not _is_float(rows[0][c]) for c in feature_cols):
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path} contains only a header row")

    features = np.empty((len(rows), len(feature_cols)))
    raw_labels: list[str] = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path} row {i}: expected {width} columns, found {len(row)}")
        for j, c in enumerate(feature_cols):
            cell = row[c]
            if not cell or not _is_float(cell):
                raise ParseError(f"{path} row {i} column {c}: non-numeric value {cell!r}")
            features[i, j] = float(cell)
        cell = row[label_col]
        if not cell:
            raise ParseError(f"{path} row {i}: missing label")
        raw_labels.append(cell)

    if all(_is_float(v) for v in raw_labels):
        keys = np.asarray([float(v) for v in raw_labels])
    else:
        keys = np.asarray(raw_labels)
    classes, labels = np.unique(keys, return_inverse=True)

    found = {"n": len(rows), "d": len(feature_cols), "K": classes.size}
    for attr, value in found.items():
        declared = getattr(schema, attr)
        if declared is not None and declared != value:
            raise SchemaMismatch(
                f"{path}: declared {attr}={declared} but found {attr}={value}"
            )
    name = schema.name or Path(path).stem
    return ClassificationData(features=features, labels=labels, name=name)


def split_train_test(
    data: ClassificationData, rng: np.random.Generator
) -> tuple[ClassificationData, ClassificationData]:
    """Uniformly random split; the first ceil(n/2) permuted rows train."""
    if data.n < 4:
        raise ShapeMismatch("need at least four rows to split")
    perm = rng.permutation(data.n)
    n_train = math.ceil(data.n / 2)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return (
        ClassificationData(data.features[train_idx], data.labels[train_idx], data.name),
        ClassificationData(data.features[test_idx], data.labels[test_idx], data.name),
    )


# ---------------------------------------------------------------------------
# logging policies and losses


def make_logging_policy(n_test: int, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    """Per unit: K independent uniform draws normalized to sum 1 (unsorted)."""
    if n_actions < 2:
        raise ShapeMismatch("need at least two actions")
    u = rng.uniform(size=(n_test, n_actions))
    return u / u.sum(axis=1, keepdims=True)


def _perturbation_factors(
    shape: tuple[int, ...], rng: np.random.Generator, factor_sd: float
) -> np.ndarray:
    """Multiplicative noise around 1, clamped below at 0.05."""
    factors = rng.normal(1.0, factor_sd, size=shape) if factor_sd > 0 else np.ones(shape)
    return np.clip(factors, _PERTURBATION_FACTOR_FLOOR, None)


def perturb_logging(
    propensities: np.ndarray,
    rng: np.random.Generator,
    factor_sd: float = _PERTURBATION_SD,
) -> np.ndarray:
    """Entrywise-noised copy of a propensity matrix, renormalized per row.

    Simulates estimation error: the perturbed matrix goes to the estimators
    while actions are sampled from the original.
    """
    p = np.asarray(propensities, dtype=float)
    noisy = p * _perturbation_factors(p.shape, rng, factor_sd)
    return noisy / noisy.sum(axis=1, keepdims=True)


def estimate_logging(
    test_features,
    sampled_actions,
    rng: np.random.Generator,
    n_actions: int | None = None,
    l2: float = 1.0,
    subset_fraction: float = _LOGGING_FIT_FRACTION,
) -> np.ndarray:
    """Estimate the behavior policy from the sampled actions.

    Fits a multinomial logistic regression on a random ``subset_fraction``
    of the (feature, action) pairs and predicts arm probabilities for every
    unit, floored and renormalized.
    """
    x = np.asarray(test_features, dtype=float)
    a = np.asarray(sampled_actions, dtype=np.intp)
    if x.shape[0] != a.size:
        raise ShapeMismatch("features and sampled actions must align")
    n_fit = int(math.floor(subset_fraction * a.size))
    if n_fit < 2:
        raise ShapeMismatch("too few units to estimate the logging policy")
    subset = rng.choice(a.size, size=n_fit, replace=False)
    model = fit_multinomial_logistic(x[subset], a[subset], l2=l2, n_classes=n_actions)
    return floor_propensities(predict_proba(model, x))


def draw_noisy_losses(
    labels, n_actions: int, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Loss matrix with mean I(action != label) and Gaussian noise of sd sigma."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    y = np.asarray(labels, dtype=np.intp)
    losses = np.ones((y.size, n_actions))
    losses[np.arange(y.size), y] = 0.0
    if sigma > 0:
        losses = losses + sigma * rng.standard_normal((y.size, n_actions))
    return losses


# ---------------------------------------------------------------------------
# run configuration and summaries


_TAG_RE = re.compile(r"^(dm|ipw|sw|dr|nw|mnw)(?:\(beta=((?:\d+\.?\d*)|(?:\.\d+))\))?$")


def parse_estimator_tag(tag: str) -> tuple[str, float | None]:
    """Split a tag like ``mnw(beta=0.5)`` into its kind and optional scale."""
    m = _TAG_RE.match(tag.strip().lower())
    if m is None:
        raise ValueError(
            f"unknown estimator tag {tag!r}; expected dm/ipw/sw/dr/nw/mnw, "
            "optionally suffixed (beta=<value>)"
        )
    kind, beta = m.group(1), m.group(2)
    return kind, (float(beta) if beta is not None else None)


def display_estimator_tag(tag: str) -> str:
    kind, beta = parse_estimator_tag(tag)
    return kind.upper() if beta is None else f"{kind.upper()}(beta={beta:g})"


@dataclass(frozen=True)
class RunConfig:
    """Everything a Monte Carlo run needs.

    ``dataset`` is a file path, or one of ``example1``/``example2`` for
    synthetic mode (then ``scenario``, ``n`` and ``n_actions`` apply).
    """

    dataset: str
    scenario: str = "unsorted"
    n: int = 300
    n_actions: int = 20
    mc_iterations: int = 500
    repetitions: int = 20
    logging_mode: str = "true"
    noise_sigma: float = 0.2
    master_seed: int = 0
    estimators: tuple[str, ...] = ("dm", "ipw", "dr", "nw", "mnw")
    spline: SplineSpec | None = None
    logistic_l2: float = 1.0
    ridge_l2: float = 1.0
    eval_sample_size: int | None = None
    fixed_logging: bool = False
    threads: int = 1
    schema: DatasetSchema | None = None

    @property
    def is_synthetic(self) -> bool:
        return self.dataset in SYNTHETIC_DATASETS

    def validate(self) -> None:
        if self.mc_iterations < 1 or self.repetitions < 1:
            raise ValueError("iteration and repetition counts must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.logging_mode not in LOGGING_MODES:
            raise ValueError(f"logging_mode must be one of {LOGGING_MODES}")
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        for tag in self.estimators:
            kind, beta = parse_estimator_tag(tag)
            if self.is_synthetic:
                if self.dataset == "example1" and kind in ("dm", "dr", "mnw"):
                    raise ValueError(
                        f"{tag!r} needs a baseline reward model; example1 has none"
                    )
            elif beta is not None:
                raise ValueError(
                    f"{tag!r}: beta-scaled baselines apply only to example2"
                )
        if self.is_synthetic:
            if self.scenario not in SCENARIOS:
                raise ValueError(f"scenario must be one of {SCENARIOS}")
            if self.n < 1 or self.n_actions < 2:
                raise ValueError("need n >= 1 and at least two arms")
        if self.eval_sample_size is not None and self.eval_sample_size < 1:
            raise ValueError("eval_sample_size must be positive")


@dataclass(frozen=True)
class EstimatorStats:
    """Bias, spread, and root mean squared error of one estimator."""

    bias: float
    sd: float
    rmse: float


@dataclass(frozen=True, eq=False)
class RepetitionRecord:
    """One repetition's ground truth and per-estimator error statistics."""

    repetition: int
    truth: float
    stats: dict[str, EstimatorStats]


@dataclass(frozen=True, eq=False)
class EvalSummary:
    """Per-estimator statistics averaged over repetitions, with the raw
    per-repetition records retained."""

    condition: str
    logging_mode: str
    estimator_tags: tuple[str, ...]
    bias: dict[str, float]
    sd: dict[str, float]
    rmse: dict[str, float]
    records: tuple[RepetitionRecord, ...]
    mc_iterations: int
    n_repetitions: int
    master_seed: int


def _stats_from_errors(errors: np.ndarray) -> EstimatorStats:
    bias = float(np.mean(errors))
    sd = float(np.std(errors))
    return EstimatorStats(bias=bias, sd=sd, rmse=math.sqrt(bias * bias + sd * sd))


def _aggregate(
    condition: str,
    logging_mode: str,
    tags: tuple[str, ...],
    records: list[RepetitionRecord],
    config: RunConfig,
) -> EvalSummary:
    bias = {t: float(np.mean([r.stats[t].bias for r in records])) for t in tags}
    sd = {t: float(np.mean([r.stats[t].sd for r in records])) for t in tags}
    rmse = {t: float(np.mean([r.stats[t].rmse for r in records])) for t in tags}
    return EvalSummary(
        condition=condition,
        logging_mode=logging_mode,
        estimator_tags=tags,
        bias=bias,
        sd=sd,
        rmse=rmse,
        records=tuple(records),
        mc_iterations=config.mc_iterations,
        n_repetitions=config.repetitions,
        master_seed=config.master_seed,
    )


def resolve_threads(requested: int = 0) -> int:
    """Worker count: 0 means auto; the OPE_KIT_THREADS variable caps it."""
    count = requested if requested > 0 else (os.cpu_count() or 1)
    env = os.environ.get("OPE_KIT_THREADS", "").strip()
    if env:
        cap = int(env)
        if cap == 0:
            cap = os.cpu_count() or 1
        count = min(count, cap)
    return max(1, count)


def _parallel_starmap(fn, argument_tuples, threads: int) -> list:
    if threads <= 1 or len(argument_tuples) <= 1:
        return [fn(*args) for args in argument_tuples]
    try:
        with ProcessPoolExecutor(max_workers=min(threads, len(argument_tuples))) as pool:
            return list(pool.map(fn, *zip(*argument_tuples)))
    except (BrokenProcessPool, OSError, PermissionError):
        return [fn(*args) for args in argument_tuples]


# ---------------------------------------------------------------------------
# synthetic mode


def _synthetic_estimate(kind, beta, problem, baseline, spec) -> float:
    data, policy = problem.data, problem.policy
    if kind == "sw":
        return sw(data, policy).value
    if kind == "ipw":
        return ipw(data, policy).value
    if kind == "nw":
        return nw(data, policy, spec).value
    scale = 1.0 if beta is None else beta
    mu = RewardPredictions(scale * baseline)
    if kind == "dm":
        return dm(data, policy, mu).value
    if kind == "dr":
        return dr(data, policy, mu).value
    return mnw(data, policy, mu, spec).value


def _synthetic_chunk(config: RunConfig, rep: int, start: int, stop: int):
    """Estimates and per-draw truths for iterations [start, stop) of one repetition."""
    tags = [(t, *parse_estimator_tag(t)) for t in config.estimators]
    size = stop - start
    estimates = {t: np.empty(size) for t in config.estimators}
    truths = np.empty(size)
    for offset, iteration in enumerate(range(start, stop)):
        rng = np.random.default_rng(
            [config.master_seed, _STREAM_ITERATION, rep, iteration]
        )
        if config.dataset == "example1":
            problem = gen_example1(config.n, config.n_actions, config.scenario, rng)
            baseline = None
        else:
            problem, preds = gen_example2(
                config.n, config.n_actions, config.scenario, 1.0, rng
            )
            baseline = preds.mu_hat
        truths[offset] = problem.true_value
        for tag, kind, beta in tags:
            estimates[tag][offset] = _synthetic_estimate(
                kind, beta, problem, baseline, config.spline
            )
    return estimates, truths


def _run_synthetic(config: RunConfig, threads: int) -> EvalSummary:
    iters = config.mc_iterations
    chunks_per_rep = 1
    if threads > 1:
        chunks_per_rep = max(1, math.ceil(threads / config.repetitions))
        chunks_per_rep = min(chunks_per_rep, iters)
    bounds = np.linspace(0, iters, chunks_per_rep + 1).astype(int)
    tasks = [
        (config, rep, int(bounds[c]), int(bounds[c + 1]))
        for rep in range(config.repetitions)
        for c in range(chunks_per_rep)
    ]
    results = _parallel_starmap(_synthetic_chunk, tasks, threads)

    records = []
    for rep in range(config.repetitions):
        chunks = results[rep * chunks_per_rep : (rep + 1) * chunks_per_rep]
        estimates = {
            t: np.concatenate([c[0][t] for c in chunks]) for t in config.estimators
        }
        truths = np.concatenate([c[1] for c in chunks])
        stats = {t: _stats_from_errors(estimates[t] - truths) for t in config.estimators}
        records.append(
            RepetitionRecord(repetition=rep, truth=float(np.mean(truths)), stats=stats)
        )
    condition = f"{config.dataset}-{config.scenario}"
    return _aggregate(condition, config.logging_mode, config.estimators, records, config)


# ---------------------------------------------------------------------------
# classification mode


@dataclass(frozen=True, eq=False)
class _ClassificationTask:
    features: np.ndarray
    labels: np.ndarray
    name: str
    config: RunConfig


def _classification_repetition(task: _ClassificationTask, rep: int) -> RepetitionRecord:
    config = task.config
    tags = [(t, *parse_estimator_tag(t)) for t in config.estimators]
    rng = np.random.default_rng([config.master_seed, _STREAM_REPETITION, rep])
    data = ClassificationData(task.features, task.labels, task.name)
    k = data.n_classes
    train, test = split_train_test(data, rng)

    classifier = fit_multinomial_logistic(
        train.features, train.labels, l2=config.logistic_l2, n_classes=k
    )
    policy_full = to_deterministic_policy(classifier, test.features)
    decided = np.argmax(policy_full.probs, axis=1)
    truth = float(np.mean(decided != test.labels))

    train_losses = draw_noisy_losses(train.labels, k, config.noise_sigma, rng)
    reward_model = fit_ridge_per_action(train.features, train_losses, l2=config.ridge_l2)
    mu_full = predict_rewards(reward_model, test.features).mu_hat

    pool = test.n
    m = config.eval_sample_size if config.eval_sample_size is not None else pool
    if m > pool:
        raise SizeTooLarge(f"eval sample size {m} exceeds the test pool {pool}")
    fixed_props = make_logging_policy(pool, k, rng) if config.fixed_logging else None

    estimates = {t: np.empty(config.mc_iterations) for t in config.estimators}
    for iteration in range(config.mc_iterations):
        it_rng = np.random.default_rng(
            [config.master_seed, _STREAM_ITERATION, rep, iteration]
        )
        idx = it_rng.choice(pool, size=m, replace=False) if m < pool else np.arange(pool)
        if fixed_props is not None:
            props = fixed_props[idx]
        else:
            props = make_logging_policy(m, k, it_rng)
        actions = sample_actions(props, it_rng)
        losses = draw_noisy_losses(test.labels[idx], k, config.noise_sigma, it_rng)
        observed = losses[np.arange(m), actions]

        if config.logging_mode == "true":
            est_props = props
        elif config.logging_mode == "perturbed":
            est_props = perturb_logging(props, it_rng)
        else:
            est_props = estimate_logging(
                test.features[idx], actions, it_rng, n_actions=k, l2=config.logistic_l2
            )

        logged = LoggedBanditData(
            chosen_action=actions, observed_reward=observed, propensities=est_props
        )
        policy = PolicyMatrix(policy_full.probs[idx])
        mu = RewardPredictions(mu_full[idx])
        for tag, kind, _ in tags:
            if kind == "dm":
                value = dm(logged, policy, mu).value
            elif kind == "ipw":
                value = ipw(logged, policy).value
            elif kind == "sw":
                value = sw(logged, policy).value
            elif kind == "dr":
                value = dr(logged, policy, mu).value
            elif kind == "nw":
                value = nw(logged, policy, config.spline).value
            else:
                value = mnw(logged, policy, mu, config.spline).value
            estimates[tag][iteration] = value

    stats = {t: _stats_from_errors(estimates[t] - truth) for t in config.estimators}
    return RepetitionRecord(repetition=rep, truth=truth, stats=stats)


def _run_classification(config: RunConfig, threads: int) -> EvalSummary:
    data = load_dataset(config.dataset, config.schema)
    if config.eval_sample_size is not None:
        pool = data.n - math.ceil(data.n / 2)
        if config.eval_sample_size > pool:
            raise SizeTooLarge(
                f"eval sample size {config.eval_sample_size} exceeds the test pool {pool}"
            )
    task = _ClassificationTask(
        features=data.features, labels=data.labels, name=data.name, config=config
    )
    tasks = [(task, rep) for rep in range(config.repetitions)]
    records = _parallel_starmap(_classification_repetition, tasks, threads)
    return _aggregate(data.name, config.logging_mode, config.estimators, records, config)


def run_monte_carlo(config: RunConfig) -> EvalSummary:
    """Run the full protocol described by ``config`` and aggregate the results.

    Any estimator failure aborts the run; nothing is silently skipped.
    """
    config.validate()
    threads = resolve_threads(config.threads)
    if config.is_synthetic:
        return _run_synthetic(config, threads)
    return _run_classification(config, threads)


def sample_size_sweep(
    config: RunConfig, sizes: list[int]
) -> list[tuple[int, EvalSummary]]:
    """Run the Monte Carlo protocol at each evaluation sample size.

    Classification mode subsamples the test pool per iteration (a size equal
    to the full pool reproduces ``run_monte_carlo`` exactly); synthetic mode
    generates problems of the requested size.
    """
    if not sizes:
        raise ValueError("at least one size is required")
    series = []
    for size in sizes:
        if size < 1:
            raise ValueError("sizes must be positive")
        if config.is_synthetic:
            cfg = dataclasses.replace(config, n=int(size))
        else:
            cfg = dataclasses.replace(config, eval_sample_size=int(size))
        series.append((int(size), run_monte_carlo(cfg)))
    return series
