import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from dsoracle import (Graph, avoidance_hitting_cost, dijkstra_reduced, enumerate_walks, evaporate,
                      shortest_path_flows, transition_matrix)
from dsoracle.reference import all_distances

from .conftest import ALPHA, graphs


def test_diamond_distances(diamond):
    dist, succ = dijkstra_reduced(diamond, 3)
    assert list(dist) == [2, 1, 3, 0]
    assert succ == [1, 3, 3, None]
    dist, succ = dijkstra_reduced(diamond, 3, [1])
    assert dist[0] == 4 and succ[0] == 2
    assert math.isinf(dist[1]) and succ[1] is None


def test_cut_everything(diamond):
    dist, succ = dijkstra_reduced(diamond, 3, [1, 2])
    assert math.isinf(dist[0])
    assert succ[0] is None
    assert dist[3] == 0


def test_ties_pick_smallest_id():
    g = Graph.from_edges(4, [(0, 2, 1), (0, 1, 1), (1, 3, 1), (2, 3, 1)])
    assert dijkstra_reduced(g, 3)[1][0] == 1


def test_target_in_failures(diamond):
    with pytest.raises(ValueError):
        dijkstra_reduced(diamond, 3, [3])


def test_chain_single_walk(chain3):
    chain = evaporate(transition_matrix(chain3), alpha=0.5)
    walks = enumerate_walks(chain, chain3, 0, 2, max_len=5)
    assert len(walks.paths) == 1
    nodes, cost, prob = walks.paths[0]
    assert nodes == (0, 1, 2)
    assert cost == 2.0
    assert prob == pytest.approx(0.25)
    assert walks.hitting_cost() == 2.0
    assert not walks.truncated


def test_diamond_walks(diamond):
    chain = evaporate(transition_matrix(diamond), alpha=ALPHA)
    walks = enumerate_walks(chain, diamond, 0, 3, max_len=4)
    assert sorted(walks.by_cost()) == [2.0, 4.0]
    a2 = ALPHA ** 2
    assert walks.hitting_cost() == pytest.approx((2 + 4 * a2) / (1 + a2), rel=1e-14)
    assert walks.hitting_time() == pytest.approx(2.0)


def test_cycle_tail_converges():
    g = Graph.from_edges(3, [(0, 1, 1), (1, 0, 1), (1, 2, 2)])
    chain = evaporate(transition_matrix(g), alpha=0.3, horizon=1.0)
    walks = enumerate_walks(chain, g, 0, 2, max_len=40)
    assert walks.relative_residual < 1e-12
    u = avoidance_hitting_cost(chain, g, 2).get(0)
    assert walks.hitting_cost() == pytest.approx(u, rel=1e-9)
    short = enumerate_walks(chain, g, 0, 2, max_len=4)
    assert short.truncated and short.residual > 0


def test_avoid_blocks_walks(diamond):
    chain = evaporate(transition_matrix(diamond), alpha=0.5)
    walks = enumerate_walks(chain, diamond, 0, 3, max_len=4, avoid=[1])
    assert [w[0] for w in walks.paths] == [(0, 2, 3)]


def test_unique_path_flows(chain3):
    np.testing.assert_allclose(shortest_path_flows(chain3, 0, 2), [1, 1, 1])


def test_symmetric_diamond_flows():
    g = Graph.from_edges(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)])
    flows = shortest_path_flows(g, 0, 3, transition_matrix(g, "uniform"))
    np.testing.assert_allclose(flows, [1, 0.5, 0.5, 1])


def test_shared_node_carries_all_flow():
    g = Graph.from_edges(5, [(0, 1, 1), (1, 2, 1), (1, 3, 1), (2, 4, 1), (3, 4, 1)])
    flows = shortest_path_flows(g, 0, 4)
    assert flows[1] == pytest.approx(1.0)
    assert flows[2] == pytest.approx(0.5) and flows[3] == pytest.approx(0.5)


def test_flows_unreachable(diamond):
    assert shortest_path_flows(diamond, 3, 0) is None


def _scipy_distances(g, t, failures):
    a = np.array(g.adjacency)
    a[list(failures), :] = 0
    a[:, list(failures)] = 0
    # distances to t are distances from t on the reversed graph
    d = dijkstra(csr_matrix(a.T), directed=True, indices=t)
    d[list(failures)] = np.inf
    return d


@settings(max_examples=80, deadline=None)
@given(graphs(max_n=12, reach_root=False), st.data())
def test_matches_scipy(g, data):
    t = data.draw(st.integers(0, g.n - 1))
    others = [x for x in range(g.n) if x != t]
    failures = data.draw(st.lists(st.sampled_from(others), unique=True, max_size=3)) if others else []
    dist, succ = dijkstra_reduced(g, t, failures)
    np.testing.assert_array_equal(dist, _scipy_distances(g, t, failures))
    for i, j in enumerate(succ):
        if j is not None:
            assert dist[i] == g.weight(i, j) + dist[j]


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=10), st.data())
def test_failures_equal_deleted_nodes(g, data):
    t = 0
    failures = data.draw(st.lists(st.integers(1, g.n - 1), unique=True, max_size=3)) if g.n > 1 else []
    a, _ = dijkstra_reduced(g, t, failures)
    b, _ = dijkstra_reduced(g.without_nodes(failures), t)
    b[list(failures)] = np.inf
    np.testing.assert_array_equal(a, b)


def test_all_distances_diamond(diamond):
    d = all_distances(diamond)
    assert d[0, 3] == 2 and d[2, 3] == 3
    assert math.isinf(d[3, 0])
