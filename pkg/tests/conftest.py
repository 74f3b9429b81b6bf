import numpy as np
import pytest

from quasinv.geometry import StarlikeBoundary

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def square():
    return StarlikeBoundary.square()


@pytest.fixture(scope="session")
def ellipse():
    return StarlikeBoundary.ellipse(1.0, 2.0)


@pytest.fixture(scope="session")
def disk():
    return StarlikeBoundary.ball(1.0, 2)


@pytest.fixture(scope="session")
def sphere3():
    return StarlikeBoundary.ball(1.0, 3)


@pytest.fixture(scope="session")
def cube():
    return StarlikeBoundary.cube()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
