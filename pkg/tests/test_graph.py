import numpy as np
import pytest
from hypothesis import given, settings

from dsoracle import Graph, GraphFormatError, Policy, diameter_exact, load_graph, transition_matrix
from dsoracle.generate import random_graph
from dsoracle.graph import granularity
from dsoracle.reference import all_distances

from .conftest import graphs


def test_chain_header_and_defaults():
    g = load_graph("n 3\n0 1 1.0\n1 2 1.0\n")
    assert (g.n, g.delta, g.d_max, g.diameter_bound) == (3, 1.0, 1, 2.0)


def test_diamond_structure(diamond):
    assert diamond.delta == 1.0
    assert diamond.d_max == 2
    assert diamond.w_max == 3.0
    assert diamond.diameter_bound == 9.0
    assert list(diamond.out_degree) == [2, 1, 1, 0]


def test_comments_and_blank_lines():
    g = load_graph("# diamond\n\nn 4  # four nodes\n0 1 1\n0 2 1 # left\n1 3 1\n2 3 3\n")
    assert g.m == 4
    assert g.weight(2, 3) == 3.0


def test_round_trip_text(diamond):
    again = load_graph(diamond.to_text())
    assert again.edges == diamond.edges
    np.testing.assert_array_equal(again.adjacency, diamond.adjacency)


@pytest.mark.parametrize("text, fragment", [
    ("", "missing"),
    ("4\n0 1 1\n", "header"),
    ("n x\n", "node count"),
    ("n 2\n0 1\n", "expected"),
    ("n 2\n0 1 abc\n", "cannot parse"),
    ("n 2\n0 1 1\n0 1 2\n", "duplicate"),
    ("n 2\n0 0 1\n", "self-loop"),
    ("n 2\n0 1 0\n", "positive"),
    ("n 2\n0 1 -1\n", "positive"),
    ("n 2\n0 2 1\n", "dangling"),
])
def test_malformed(text, fragment):
    with pytest.raises(GraphFormatError, match=fragment):
        load_graph(text)


def test_granularity_rationals():
    assert granularity([0.5, 1.5, 2]) == 0.5
    assert load_graph("n 3\n0 1 0.5\n1 2 1.25\n").delta == 0.25
    assert load_graph("n 3\n0 1 2\n1 2 4\n").delta == 2.0


def test_degree_weighted_diamond(diamond):
    p = transition_matrix(diamond).p
    assert p[0, 1] == p[0, 2] == 0.5
    assert p[1, 3] == p[2, 3] == 1.0
    assert p[3].sum() == 0.0


def test_degree_weighted_uneven():
    g = Graph.from_edges(4, [(0, 1, 1), (0, 2, 3), (1, 3, 1), (2, 3, 3)])
    p = transition_matrix(g, Policy.DEGREE_WEIGHTED).p
    assert (p[0, 1], p[0, 2]) == (0.25, 0.75)
    u = transition_matrix(g, "uniform").p
    assert (u[0, 1], u[0, 2]) == (0.5, 0.5)


def test_diameter_exact_diamond(diamond):
    # L(2,3) = 3 is the longest finite pair distance
    assert diameter_exact(diamond) == 3.0
    assert diamond.with_exact_diameter().diameter_bound == 3.0


def test_without_nodes_keeps_ids(diamond):
    g = diamond.without_nodes([1])
    assert g.n == 4
    assert g.weight(0, 1) == 0.0 and g.weight(1, 3) == 0.0
    assert g.weight(0, 2) == 1.0


@given(graphs(max_n=10))
def test_rows_substochastic(g):
    for policy in Policy:
        p = transition_matrix(g, policy).p
        sums = p.sum(axis=1)
        for i in range(g.n):
            expected = 1.0 if g.out_degree[i] else 0.0
            assert sums[i] == pytest.approx(expected, abs=1e-12)
        assert ((p > 0) == (g.adjacency > 0)).all()


@settings(max_examples=100)
@given(graphs(max_n=12))
def test_default_bound_dominates_diameter(g):
    assert g.diameter_bound >= diameter_exact(g)


def test_bound_dominates_on_random_graphs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = random_graph(rng, int(rng.integers(2, 31)))
        dist = all_distances(g)
        assert g.diameter_bound >= dist[np.isfinite(dist)].max()
