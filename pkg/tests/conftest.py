import numpy as np
import pytest
from hypothesis import strategies as st

from dsoracle import Graph

ALPHA = 1 / 7


@pytest.fixture
def diamond() -> Graph:
    return Graph.from_edges(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 3)])


@pytest.fixture
def chain3() -> Graph:
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@st.composite
def graphs(draw, min_n=2, max_n=8, max_weight=5, max_out_degree=4, reach_root=True):
    """Small weighted digraphs; with ``reach_root`` every node reaches node 0."""
    n = draw(st.integers(min_n, max_n))
    edges = {}
    outdeg = [0] * n
    if reach_root:
        for k in range(1, n):
            parent = draw(st.integers(0, k - 1))
            edges[(k, parent)] = draw(st.integers(1, max_weight))
            outdeg[k] += 1
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                    st.integers(1, max_weight)), max_size=2 * n))
    for i, j, w in extra:
        if i != j and (i, j) not in edges and outdeg[i] < max_out_degree:
            edges[(i, j)] = w
            outdeg[i] += 1
    return Graph.from_edges(n, [(i, j, w) for (i, j), w in edges.items()])


def inverse(a) -> np.ndarray:
    return np.linalg.inv(np.asarray(a, dtype=float))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
