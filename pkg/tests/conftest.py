"""Shared fixture builders for the test suite."""

import numpy as np
import pytest

from rail.harness import DomainSpec, RunData
from rail.store import (
    EmbeddingDataset,
    LabelRegistry,
    register_domain,
    synthesize_domains,
)


def make_run_data(n_domains=3, classes=4, train=40, test=25, dim=32,
                  separation=1.2, noise=0.15, seed=5):
    """Synthetic train/test splits plus the matching text table."""
    trains, table = synthesize_domains(n_domains, classes, train, dim,
                                       separation, seed, noise=noise,
                                       role="train")
    tests, _ = synthesize_domains(n_domains, classes, test, dim,
                                  separation, seed, noise=noise,
                                  role="test")
    return RunData(train_sets=trains, test_sets=tests, table=table)


def domain_specs(n):
    return [DomainSpec(name=f"dom{k:02d}", train="", test="") for k in range(n)]


def registry_for(datasets):
    registry = LabelRegistry()
    for ds in datasets:
        register_domain(registry, ds.class_names, ds.domain_name)
    return registry


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(0)
    features = rng.standard_normal((12, 6))
    labels = np.repeat(np.arange(3), 4)
    return EmbeddingDataset(
        domain_name="tiny",
        features=features,
        labels=labels,
        class_names=["ant", "bee", "cat"],
    )
