"""Oracle-versus-Dijkstra verification over seeded random corpora."""

from __future__ import annotations

import copy
import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from flint import arb, arb_mat

from .errors import OracleError
from .generate import random_instance
from .graph import Graph, Policy
from .oracle import Oracle, Status, preprocess, query
from .reference import dijkstra_reduced

# failure-set sizes drawn per target; None stands for n - 2
FAILURE_SIZES = (0, 1, 2, 5, None)


def failure_sets(rng: np.random.Generator, n: int, t: int, sizes=FAILURE_SIZES) -> list[tuple[int, ...]]:
    others = np.array([x for x in range(n) if x != t])
    out = []
    for size in sizes:
        k = max(n - 2, 0) if size is None else size
        k = min(k, len(others))
        out.append(tuple(sorted(rng.choice(others, size=k, replace=False).tolist())))
    return out


def compare(g: Graph, t: int, failures, result) -> list[str]:
    """Differences between a query result and Dijkstra on the reduced graph."""
    want, _ = dijkstra_reduced(g, t, failures)
    failed = set(failures)
    problems = []
    for i in range(g.n):
        got = result.distance[i]
        if i in failed:
            if result.status[i] is not Status.FAILED:
                problems.append(f"node {i}: failed node reported {result.status[i].value}")
            continue
        if not math.isfinite(want[i]):
            if got is not None:
                problems.append(f"node {i}: unreachable but got distance {got}")
            continue
        if got is None or got != want[i]:
            problems.append(f"node {i}: distance {got}, expected {want[i]:g}")
            continue
        nodes = result.path(i)
        length = sum(g.weight(a, b) for a, b in zip(nodes, nodes[1:]))
        if failed.intersection(nodes) or length != want[i] or any(
                g.weight(a, b) <= 0 for a, b in zip(nodes, nodes[1:])):
            problems.append(f"node {i}: tree path {nodes} is not a valid shortest path")
    return problems


@dataclass
class InstanceReport:
    index: int
    n: int
    alpha: float
    queries: int = 0
    mismatches: list[str] = field(default_factory=list)


def instance_graph(seed: int, index: int, max_n: int = 25, max_out_degree: int = 4,
                   max_diameter: float = 8) -> tuple[Graph, np.random.Generator]:
    rng = np.random.default_rng([seed, index])
    g = random_instance(rng, n_min=min(3, max_n), max_n=max_n, max_out_degree=max_out_degree, max_diameter=max_diameter)
    return g, rng


def perturb(o: Oracle, rng: np.random.Generator, g: Graph) -> Oracle:
    """Zero one entry ``F_o[s, t]`` with ``s`` able to reach ``t``."""
    dist = np.stack([dijkstra_reduced(g, t)[0] for t in range(g.n)], axis=1)
    pairs = [(s, t) for s in range(g.n) for t in range(g.n) if s != t and math.isfinite(dist[s, t])]
    s, t = pairs[int(rng.integers(len(pairs)))]
    f_o = np.array(o.f_o)
    f_o[s, t] = 0.0
    f_o.setflags(write=False)
    ext = o.extended
    if ext is not None:
        ext = copy.copy(ext)
        ext.f = arb_mat(o.extended.f)
        ext.f[s, t] = arb(0)
    return dataclasses.replace(o, f_o=f_o, extended=ext)


def verify_instance(seed: int, index: int, *, max_n: int = 25, bits="auto",
                    inject_fault: bool = False,
                    policy: Policy | str = Policy.DEGREE_WEIGHTED) -> InstanceReport:
    g, rng = instance_graph(seed, index, max_n=max_n)
    o = preprocess(g, policy=policy, bits=bits)
    if inject_fault:
        o = perturb(o, rng, g)
    report = InstanceReport(index, g.n, o.alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t in range(g.n):
            for failures in failure_sets(rng, g.n, t):
                report.queries += 1
                try:
                    result = query(o, t, failures, raw_cost=False)
                    problems = compare(g, t, failures, result)
                except OracleError as exc:
                    problems = [f"query raised {exc}"]
                report.mismatches += [f"instance {index} t={t} F={list(failures)}: {p}" for p in problems]
    return report


def _verify_star(args):
    seed, index, kwargs = args
    return verify_instance(seed, index, **kwargs)


def verify_corpus(seed: int, instances: int, *, jobs: int = 1, **kwargs) -> list[InstanceReport]:
    """Reports in instance order; ``jobs > 1`` spreads instances over processes."""
    work = [(seed, k, kwargs) for k in range(instances)]
    if jobs <= 1:
        return [_verify_star(w) for w in work]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_verify_star, work))
