"""Shared fixtures: small deterministic datasets reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from molkern import synthetic
from molkern.dataset_io import FeatureDataset, TargetTable
from molkern.kernels import KernelConfig


@pytest.fixture(scope="session")
def fp_dataset():
    return synthetic.random_fingerprints(40, 64, seed=1)


@pytest.fixture(scope="session")
def feature_pool():
    """80-molecule feature manifold with the seven standard targets."""
    return synthetic.desk_fixture(n=80, seed=3)


@pytest.fixture(scope="session")
def feature_dataset(feature_pool) -> FeatureDataset:
    return feature_pool[0]


@pytest.fixture(scope="session")
def target_table(feature_pool) -> TargetTable:
    return feature_pool[1]


@pytest.fixture(scope="session")
def gaussian_config() -> KernelConfig:
    return KernelConfig("gaussian", sigma_l=100.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(987)
