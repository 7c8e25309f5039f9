import os

import pytest

from compbias.harness import ExperimentConfig, run_sweep
from compbias.datagen import Encoding
from compbias.nn_engine import OptimizerKind


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full 256-run sweeps (minutes)")


def _workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


@pytest.fixture(scope="session")
def oht2_sgd_ce_sweep():
    return run_sweep(ExperimentConfig(), workers=_workers())


@pytest.fixture(scope="session")
def oht3_sgd_ce_sweep():
    return run_sweep(ExperimentConfig(encoding=Encoding.OHT3), workers=_workers())


@pytest.fixture(scope="session")
def oht2_adam_ce_sweep():
    return run_sweep(ExperimentConfig(optimizer=OptimizerKind.ADAM), workers=_workers())
