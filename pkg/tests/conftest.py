import sys

import numpy as np
import pytest
from hypothesis import settings

from nutriclass.schema import preprocess, split_train_test
from nutriclass.synthetic import generate_synthetic

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_data():
    """The default synthetic dataset (21,858 rows, generator seed 7), encoded."""
    return preprocess(generate_synthetic())


@pytest.fixture(scope="session")
def small_data():
    return preprocess(generate_synthetic(n=1500, seed=3))


@pytest.fixture(scope="session")
def small_split(small_data):
    return split_train_test(small_data, 0.2, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
