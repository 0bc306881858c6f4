import numpy as np
import pytest

from graphsee import Graph, karate_club


@pytest.fixture(scope="session")
def karate():
    return karate_club()


@pytest.fixture
def k3():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def star():
    return Graph.from_edges(5, [(0, i) for i in range(1, 5)])


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Connected G(n, p) by rejection; seeds advance until a connected draw appears."""
    while True:
        rng = np.random.default_rng(seed)
        upper = np.triu(rng.random((n, n)) < p, k=1)
        g = Graph.from_adjacency((upper | upper.T).astype(int))
        if g.is_connected():
            return g
        seed += 10_000


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
