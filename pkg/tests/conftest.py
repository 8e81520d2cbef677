import numpy as np
import pytest

from opencavity.assembly import Discretization
from opencavity.mesh import cavity_mesh, extended_cavity_mesh


@pytest.fixture(scope="session")
def cav4():
    return Discretization(cavity_mesh(4))


@pytest.fixture(scope="session")
def cav8():
    return Discretization(cavity_mesh(8))


@pytest.fixture(scope="session")
def ext4():
    return Discretization(extended_cavity_mesh(4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list = []


def report(line: str):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
