"""Seeded random graphs for verification runs and benchmarks."""

from __future__ import annotations

import numpy as np

from .graph import Graph, diameter_exact


def random_graph(rng: np.random.Generator, n: int, *, max_out_degree: int = 4,
                 extra_edges: float = 1.0, weights: tuple[int, int] = (1, 5),
                 strongly_connected: bool = False, hubs: int | None = None) -> Graph:
    """Random digraph in which every node can reach node ``order[0]``.

    A random in-arborescence toward a root is laid down first, then about
    ``extra_edges * n`` further edges, never exceeding ``max_out_degree``.
    With ``hubs`` set, tree parents come from the first ``hubs`` nodes of
    the order and extra edges point into the first ``2 * hubs``, which
    keeps the graph shallow.
    With ``strongly_connected`` a random out-arborescence from the root is
    added as well, so every node reaches every other.
    Weights are integers drawn uniformly from ``weights`` (inclusive).
    """
    if n < 1:
        raise ValueError("n must be positive")
    order = rng.permutation(n)
    edges: dict[tuple[int, int], int] = {}
    outdeg = np.zeros(n, dtype=int)
    lo, hi = weights

    def add(i, j):
        if i == j or (i, j) in edges or outdeg[i] >= max_out_degree:
            return False
        edges[(i, j)] = int(rng.integers(lo, hi + 1))
        outdeg[i] += 1
        return True

    for k in range(1, n):
        add(int(order[k]), int(order[rng.integers(0, k if hubs is None else min(k, hubs))]))
    if strongly_connected and n > 1:
        # the in-tree uses one out-edge per non-root node, so a capacity of
        # two leaves room for one out-tree edge each
        for k in range(1, n):
            child = int(order[k])
            parents = [int(order[x]) for x in range(k) if outdeg[order[x]] < max_out_degree]
            if not parents:
                raise ValueError("max_out_degree too small for a strongly connected graph")
            add(parents[int(rng.integers(0, len(parents)))], child)
    target = int(round(extra_edges * n))
    attempts = 0
    while target > 0 and attempts < 20 * n * n:
        attempts += 1
        head = rng.integers(0, n) if hubs is None else order[rng.integers(0, min(n, 2 * hubs))]
        if add(int(rng.integers(0, n)), int(head)):
            target -= 1
    return Graph.from_edges(n, [(i, j, w) for (i, j), w in edges.items()])


def random_instance(rng: np.random.Generator, *, n_min: int = 3, max_n: int = 25,
                    max_out_degree: int = 4, max_diameter: float | None = 8,
                    weights: tuple[int, int] = (1, 5), strongly_connected: bool = False,
                    tries: int = 200) -> Graph:
    """Graph with ``n`` in ``[n_min, max_n]`` whose diameter bound is exact.

    Candidates whose weighted diameter exceeds ``max_diameter`` are
    redrawn at the same ``n``, so sizes stay uniform. Shapes alternate
    between free-form graphs and hub-rooted shallow ones, and fall back to
    a single hub after half the budget.
    """
    n = int(rng.integers(n_min, max_n + 1))
    for attempt in range(tries):
        hubs = None if attempt % 2 == 0 else int(rng.integers(1, 4))
        if attempt >= tries // 2:
            hubs = 1
        extra = float(rng.uniform(0.3, 1.0))
        g = random_graph(rng, n, max_out_degree=max_out_degree, extra_edges=extra,
                         weights=weights, strongly_connected=strongly_connected, hubs=hubs)
        diam = diameter_exact(g)
        if max_diameter is None or diam <= max_diameter:
            return g.with_diameter_bound(max(diam, 1.0))
    raise RuntimeError(f"no graph with diameter <= {max_diameter} after {tries} draws")
