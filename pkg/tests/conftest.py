import numpy as np
import pytest

from embaug.graph_corpus import Graph

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line per acceptance criterion; echoed in the summary."""
    def record(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def two_cliques():
    return Graph.from_edges([(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])


@pytest.fixture
def star():
    return Graph.from_edges([(0, k) for k in range(1, 5)])


def random_graph(n, m, seed):
    rng = np.random.default_rng(seed)
    return Graph.from_edges(rng.integers(0, n, size=(m, 2)), node_count=n)
