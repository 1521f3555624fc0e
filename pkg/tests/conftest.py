import numpy as np
import pytest

from gappart import kernels
from gappart.graph import Graph, generate_clique_chain


@pytest.fixture
def c4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def p4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def k4():
    return Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])


@pytest.fixture
def two_triangles():
    """Two triangles joined by the bridge 2-3."""
    return generate_clique_chain([3, 3])


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


def random_graph(rng, n, p, weighted=False):
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    w = rng.uniform(0.5, 3.0, size=int(keep.sum())) if weighted else None
    return Graph.from_arrays(n, iu[keep], iv[keep], w)


def random_stochastic(rng, n, g):
    return rng.dirichlet(np.ones(g), size=n)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
