import numpy as np
import pytest

from cellgrid.qap import QapInstance

ACCEPTANCE_LINES: list[str] = []


def reference_cost(dist, flow, p) -> int:
    """Plain double loop over facility pairs, kept apart from the vectorised path."""
    total = 0
    n = len(p)
    for i in range(n):
        for j in range(n):
            total += int(dist[p[i]][p[j]]) * int(flow[i][j])
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_instance():
    return QapInstance(dist=[[0, 1], [1, 0]], flow=[[0, 3], [3, 0]], name="tiny")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
