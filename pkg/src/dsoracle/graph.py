"""Directed weighted graphs, edge-list parsing and transition matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import GraphFormatError


class Policy(str, Enum):
    DEGREE_WEIGHTED = "degree-weighted"
    UNIFORM = "uniform"


def _exact(weight) -> Fraction:
    if isinstance(weight, Fraction):
        return weight
    if isinstance(weight, float):
        # shortest decimal repr, so 0.1 stays 1/10
        return Fraction(repr(weight))
    return Fraction(str(weight).strip())


def granularity(weights) -> Fraction:
    """Largest value dividing every weight exactly (weights scaled to integers first)."""
    exact = [_exact(w) for w in weights]
    if not exact:
        return Fraction(1)
    scale = reduce(math.lcm, (w.denominator for w in exact), 1)
    g = reduce(math.gcd, (int(w * scale) for w in exact))
    return Fraction(g, scale)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph with positive edge weights.

    ``adjacency[i, j]`` holds the weight of edge i->j (0 when absent).
    ``delta`` is the granularity: every weight is an integer multiple of it.
    ``diameter_bound`` is an upper estimate of the weighted diameter,
    ``(n - 1) * w_max`` unless an exact value was supplied.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    adjacency: np.ndarray = field(repr=False)
    out_degree: np.ndarray = field(repr=False)
    d_max: int
    delta: float
    w_max: float
    diameter_bound: float

    @classmethod
    def from_edges(cls, n: int, edges, diameter_bound: float | None = None) -> Graph:
        if n < 1:
            raise GraphFormatError(f"graph needs at least one node, got n={n}")
        seen = set()
        exact_weights = []
        clean = []
        for src, dst, weight in edges:
            src, dst = int(src), int(dst)
            w = _exact(weight)
            if not (0 <= src < n and 0 <= dst < n):
                raise GraphFormatError(f"dangling node id in edge {src}->{dst} (n={n})")
            if src == dst:
                raise GraphFormatError(f"self-loop on node {src}")
            if w <= 0:
                raise GraphFormatError(f"non-positive weight {weight} on edge {src}->{dst}")
            if (src, dst) in seen:
                raise GraphFormatError(f"duplicate edge {src}->{dst}")
            seen.add((src, dst))
            exact_weights.append(w)
            clean.append((src, dst, float(w)))

        adjacency = np.zeros((n, n))
        for src, dst, w in clean:
            adjacency[src, dst] = w
        out_degree = np.count_nonzero(adjacency, axis=1)
        w_max = max((w for _, _, w in clean), default=0.0)
        if diameter_bound is None:
            diameter_bound = (n - 1) * w_max
        return cls(
            n=n,
            edges=tuple(clean),
            adjacency=_frozen(adjacency),
            out_degree=_frozen(out_degree),
            d_max=int(out_degree.max()),
            delta=float(granularity(exact_weights)),
            w_max=w_max,
            diameter_bound=float(diameter_bound),
        )

    @property
    def m(self) -> int:
        return len(self.edges)

    def weight(self, i: int, j: int) -> float:
        return float(self.adjacency[i, j])

    def successors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def with_diameter_bound(self, bound: float) -> Graph:
        return Graph(
            self.n, self.edges, self.adjacency, self.out_degree,
            self.d_max, self.delta, self.w_max, float(bound),
        )

    def with_exact_diameter(self) -> Graph:
        """Copy whose ``diameter_bound`` is the exact weighted diameter."""
        return self.with_diameter_bound(diameter_exact(self))

    def without_nodes(self, nodes) -> Graph:
        """Same node ids, with every edge touching ``nodes`` removed."""
        drop = set(nodes)
        kept = [(i, j, w) for i, j, w in self.edges if i not in drop and j not in drop]
        return Graph.from_edges(self.n, kept)

    def to_text(self) -> str:
        lines = [f"n {self.n}"]
        lines += [f"{i} {j} {w:g}" for i, j, w in self.edges]
        return "\n".join(lines) + "\n"


def load_graph(text: str) -> Graph:
    """Parse an edge-list document.

    The first non-comment line is ``n <count>``; every following line is
    ``<src> <dst> <weight>``. ``#`` starts a comment.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphFormatError(f"line {lineno}: expected header 'n <count>', got {raw!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad node count {parts[1]!r}") from None
            continue
        if len(parts) != 3:
            raise GraphFormatError(f"line {lineno}: expected '<src> <dst> <weight>', got {raw!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
            weight = Fraction(parts[2])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: cannot parse {raw!r}") from None
        edges.append((src, dst, weight))
    if n is None:
        raise GraphFormatError("empty document: missing 'n <count>' header")
    return Graph.from_edges(n, edges)


def read_graph(path) -> Graph:
    return load_graph(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-substochastic random-walk matrix built from a graph.

    Rows of nodes without out-edges are all zero.
    """

    p: np.ndarray = field(repr=False)
    policy: Policy
    graph: Graph = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n


def transition_matrix(g: Graph, policy: Policy | str = Policy.DEGREE_WEIGHTED) -> TransitionMatrix:
    """``P = D^-1 A`` (degree-weighted) or ``1/outdeg`` on every edge (uniform)."""
    policy = Policy(policy)
    a = g.adjacency
    if policy is Policy.DEGREE_WEIGHTED:
        weights = a
    else:
        weights = (a > 0).astype(float)
    totals = weights.sum(axis=1, keepdims=True)
    p = np.divide(weights, totals, out=np.zeros_like(weights), where=totals > 0)
    return TransitionMatrix(_frozen(p), policy, g)


def diameter_exact(g: Graph) -> float:
    """Largest finite shortest-path distance over ordered node pairs."""
    from .reference import all_distances

    dist = all_distances(g)
    finite = dist[np.isfinite(dist)]
    return float(finite.max()) if finite.size else 0.0
