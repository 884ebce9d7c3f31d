"""Shared fixtures: the bundled dataset and small trained models."""

import pytest

from twinscope.data import SplitSpec, bundled_ilpd_text, impute, load_ilpd, split
from twinscope.features import PatientFeatures
from twinscope.forest import ForestConfig, train_forest
from twinscope.logistic import train_logistic


@pytest.fixture(scope="session")
def ilpd_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ilpd.csv"
    path.write_text(bundled_ilpd_text(), encoding="utf-8", newline="")
    return str(path)


@pytest.fixture(scope="session")
def ilpd(ilpd_path):
    return load_ilpd(ilpd_path)


@pytest.fixture(scope="session")
def train_test(ilpd):
    train, test = split(ilpd, SplitSpec(seed=42))
    return impute(train), impute(test)


@pytest.fixture(scope="session")
def small_forest(train_test):
    train, _ = train_test
    return train_forest(train, ForestConfig(n_trees=30, max_depth=6, seed=42))


@pytest.fixture(scope="session")
def logistic_model(train_test):
    train, _ = train_test
    return train_logistic(train)


def patient(**overrides) -> PatientFeatures:
    """A complete, plausible record with keyword overrides."""
    base = dict(
        age=45.0,
        gender=1.0,
        total_bilirubin=0.9,
        direct_bilirubin=0.2,
        alp=180.0,
        alt=30.0,
        ast=35.0,
        total_proteins=6.8,
        albumin=3.4,
        ag_ratio=1.0,
    )
    base.update(overrides)
    return PatientFeatures(**base)
