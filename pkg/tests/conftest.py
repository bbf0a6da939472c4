"""Shared fixtures: synthetic classification datasets and small logged instances."""
from pathlib import Path

import numpy as np
import pytest

from ope_kit import LoggedBanditData, PolicyMatrix


def synth_classification(
    n: int,
    d: int,
    n_classes: int,
    seed: int,
    clusters_per_class: int = 2,
    center_scale: float = 1.9,
    spread: float = 1.35,
):
    """Gaussian-cluster classification data with nonlinear class structure.

    Two clusters per class keep the classes linearly inseparable, so a
    linear target classifier lands at a moderate error rate and a linear
    loss model stays visibly biased.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_scale, size=(n_classes, clusters_per_class, d))
    proportions = rng.dirichlet(np.full(n_classes, 6.0))
    proportions = 0.5 * proportions + 0.5 / n_classes
    proportions /= proportions.sum()
    labels = rng.choice(n_classes, size=n, p=proportions)
    which = rng.integers(0, clusters_per_class, size=n)
    features = centers[labels, which] + spread * rng.standard_normal((n, d))
    return features, labels


def write_classification_csv(path: Path, features, labels, fmt: str = "%.6f") -> Path:
    lines = [
        ",".join(fmt % v for v in row) + f",{label}"
        for row, label in zip(features, labels)
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def toy_dataset_csv(tmp_path_factory) -> Path:
    features, labels = synth_classification(400, 6, 4, seed=11)
    return write_classification_csv(
        tmp_path_factory.mktemp("data") / "toy.csv", features, labels
    )


@pytest.fixture
def small_logged_instance():
    """A 60-unit, 5-arm instance with well-spread propensities."""
    rng = np.random.default_rng(5)
    n, k = 60, 5
    props = rng.uniform(0.05, 1.0, size=(n, k))
    props /= props.sum(axis=1, keepdims=True)
    actions = rng.integers(0, k, size=n)
    rewards = rng.normal(1.0, 0.7, size=n)
    policy = rng.uniform(size=(n, k))
    policy /= policy.sum(axis=1, keepdims=True)
    data = LoggedBanditData(
        chosen_action=actions, observed_reward=rewards, propensities=props
    )
    return data, PolicyMatrix(policy)
