"""Brute-force ground truth: Dijkstra with node removal, walk enumeration,
and shortest-path flow counting.

Nothing here touches fundamental matrices; the module only depends on the
graph and on plain transition probabilities so it can judge every other
module.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph


def _incoming(g: Graph) -> list[list[tuple[int, float]]]:
    rev = [[] for _ in range(g.n)]
    for i, j, w in g.edges:
        rev[j].append((i, w))
    return rev


def dijkstra_reduced(g: Graph, t: int, failures=()) -> tuple[np.ndarray, list[int | None]]:
    """Distances to ``t`` after deleting ``failures`` and their edges.

    Returns ``(distance, successor)``: unreachable and failed nodes get
    ``inf`` and ``None``. Among equally short continuations the successor
    with the smallest id wins.
    """
    failed = set(failures)
    if t in failed:
        raise ValueError(f"target {t} is in the failure set")
    dist = np.full(g.n, math.inf)
    succ: list[int | None] = [None] * g.n
    rev = _incoming(g)
    dist[t] = 0.0
    heap = [(0.0, t)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for i, w in rev[u]:
            if i in failed or i in done:
                continue
            nd = d + w
            if nd < dist[i] or (nd == dist[i] and succ[i] is not None and u < succ[i]):
                dist[i] = nd
                succ[i] = u
                heapq.heappush(heap, (nd, i))
    return dist, succ


def all_distances(g: Graph) -> np.ndarray:
    """``dist[s, t]`` for every ordered pair; ``inf`` where unreachable."""
    return np.stack([dijkstra_reduced(g, t)[0] for t in range(g.n)], axis=1)


@dataclass
class PathSet:
    """Enumerated first-passage walks ``s -> t``.

    ``paths`` holds ``(nodes, cost, probability)`` triples. ``residual`` is
    the probability mass that was neither absorbed at ``t`` nor evaporated
    within ``max_len`` steps (including pruned prefixes); ``truncated`` is
    set when that mass is nonzero.
    """

    paths: list[tuple[tuple[int, ...], float, float]] = field(default_factory=list)
    max_len: int = 0
    residual: float = 0.0

    @property
    def truncated(self) -> bool:
        return self.residual > 0.0

    @property
    def mass(self) -> float:
        return math.fsum(p for _, _, p in self.paths)

    @property
    def relative_residual(self) -> float:
        mass = self.mass
        return math.inf if mass == 0 else self.residual / mass

    def by_cost(self) -> dict[float, float]:
        """Aggregated walk probability per total cost."""
        agg = defaultdict(float)
        for _, cost, prob in self.paths:
            agg[cost] += prob
        return dict(sorted(agg.items()))

    def hitting_cost(self) -> float:
        mass = self.mass
        if mass == 0:
            raise ValueError("no walk reaches the target")
        return math.fsum(c * p for _, c, p in self.paths) / mass

    def hitting_time(self) -> float:
        mass = self.mass
        if mass == 0:
            raise ValueError("no walk reaches the target")
        return math.fsum((len(nodes) - 1) * p for nodes, _, p in self.paths) / mass


def enumerate_walks(p_alpha, weights, s: int, t: int, max_len: int,
                    avoid=(), prune: float = 1e-18) -> PathSet:
    """Depth-first enumeration of every walk ``s -> t`` of at most ``max_len`` steps.

    Walks stop at their first visit to ``t`` and never enter ``avoid``.
    Prefixes whose probability drops below ``prune`` are dropped and their
    mass is counted in ``residual``.
    """
    p_alpha = np.asarray(getattr(p_alpha, "p_alpha", p_alpha), dtype=float)
    weights = np.asarray(getattr(weights, "adjacency", weights), dtype=float)
    blocked = set(avoid)
    out = PathSet(max_len=max_len)
    if s == t:
        out.paths.append(((s,), 0.0, 1.0))
        return out
    nbrs = [[(int(j), float(p_alpha[i, j]), float(weights[i, j])) for j in np.flatnonzero(p_alpha[i])]
            for i in range(p_alpha.shape[0])]
    residual = 0.0
    stack = [((s,), 0.0, 1.0)]
    while stack:
        nodes, cost, prob = stack.pop()
        steps = len(nodes) - 1
        if steps == max_len:
            residual += prob
            continue
        for j, pj, wj in nbrs[nodes[-1]]:
            if j in blocked:
                continue
            q = prob * pj
            if j == t:
                out.paths.append((nodes + (j,), cost + wj, q))
            elif q < prune:
                residual += q
            else:
                stack.append((nodes + (j,), cost + wj, q))
    out.residual = residual
    return out


def shortest_path_flows(g: Graph, s: int, t: int, p=None) -> np.ndarray | None:
    """Probability-weighted share of minimum-weight ``s -> t`` paths through each node.

    Every shortest path is enumerated explicitly and weighted by the
    product of its transition probabilities under ``p`` (the graph's
    degree-weighted matrix by default). Returns ``None`` when ``t`` is
    unreachable from ``s``.
    """
    if p is None:
        from .graph import transition_matrix
        p = transition_matrix(g)
    p = np.asarray(getattr(p, "p", p), dtype=float)
    dist_to_t, _ = dijkstra_reduced(g, t)
    best = dist_to_t[s]
    if not math.isfinite(best):
        return None
    tol = 1e-9 * max(1.0, best)
    adj = [[(j, g.adjacency[i, j]) for j in g.successors(i)] for i in range(g.n)]

    paths = []

    def walk(node, cost, prob, visited):
        if node == t:
            if abs(cost - best) <= tol:
                paths.append((visited, prob))
            return
        for j, w in adj[node]:
            if j in visited or cost + w + dist_to_t[j] > best + tol:
                continue
            walk(j, cost + w, prob * p[node, j], visited | {j})

    walk(s, 0.0, 1.0, frozenset([s]))
    total = math.fsum(prob for _, prob in paths)
    flows = np.zeros(g.n)
    for visited, prob in paths:
        for m in visited:
            flows[m] += prob
    return flows / total
