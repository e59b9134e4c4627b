import numpy as np
import pytest

from flab.synthgen import ScenarioConfig, make_train_set, sample_testset
from flab.tinynet import Architecture, Hyperparams, train_pool


@pytest.fixture(scope="session")
def small_scenario():
    return ScenarioConfig(n_train=200, n_test_per_cell=100, seed=5)


@pytest.fixture(scope="session")
def small_pool(small_scenario):
    """Four quickly trained models plus their train/test data."""
    train = make_train_set(small_scenario)
    test = sample_testset(small_scenario, 99)
    models = train_pool(train, Architecture(), Hyperparams(epochs=5), [11, 12, 13, 14])
    return models, train, test


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
