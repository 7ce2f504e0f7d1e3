import sys

import numpy as np
import pytest

from newton_noda import NaepProblem

SQ = 1 / np.sqrt(2)


@pytest.fixture
def A2():
    return np.array([[2.0, -1.0], [-1.0, 2.0]])


@pytest.fixture
def prob2(A2):
    """2x2 problem whose ground state is the symmetric vector with lambda = 4/3."""
    return NaepProblem(A2, [1.0, 1.0], 1.0)


@pytest.fixture
def prob2_linear(A2):
    return NaepProblem(A2, [1.0, 1.0], 0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
