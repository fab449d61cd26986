from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from memberscope.io import builtin_experiment, load_povm

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def table1():
    return load_povm("table1")


@pytest.fixture(scope="session")
def table2():
    return load_povm("table2")


@pytest.fixture(scope="session")
def prep1():
    return builtin_experiment("prep1")


@pytest.fixture(scope="session")
def prep2():
    return builtin_experiment("prep2")


def random_hermitian(rng: np.random.Generator, d: int = 4) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[name])
