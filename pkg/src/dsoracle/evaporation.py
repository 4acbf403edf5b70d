"""Evaporating chains, the safe evaporation factor, routing-continuum edge
probabilities and continuum sweeps.

Each edge transition is damped by ``alpha ** w``; the lost mass flows to an
implicit sink that is never stored as a row or column.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import markov
from .errors import NumericalGuardError
from .graph import Graph, Policy, TransitionMatrix, transition_matrix

UNDERFLOW_FLOOR = 1e-280


def min_safe_alpha(horizon: float) -> float:
    """Smallest ``alpha`` with ``alpha ** (horizon + 1) >= UNDERFLOW_FLOOR``."""
    floor = math.log(UNDERFLOW_FLOOR)
    alpha = math.exp(floor / (horizon + 1.0))
    # step up past rounding so the guard in ``evaporate`` accepts it
    while (horizon + 1.0) * math.log(alpha) < floor:
        alpha = math.nextafter(alpha, 2.0)
    return alpha


@dataclass(frozen=True, eq=False)
class EvaporatedChain:
    p_alpha: np.ndarray = field(repr=False)
    alpha: float
    transition: TransitionMatrix = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.p_alpha.shape[0]

    @property
    def evaporation(self) -> np.ndarray:
        """Per-row mass sent to the implicit sink."""
        return 1.0 - self.p_alpha.sum(axis=1)


def evaporate(p: TransitionMatrix, w=None, alpha: float = 0.5, *,
              horizon: float | None = None) -> EvaporatedChain:
    """``P(alpha) = P * alpha ** W`` on edges.

    ``horizon`` defaults to the graph's diameter bound and drives the
    underflow guard.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if w is None:
        w = p.graph.adjacency
    w = np.asarray(getattr(w, "adjacency", w), dtype=float)
    if horizon is None:
        horizon = p.graph.diameter_bound
    if alpha < 1.0 and (horizon + 1.0) * math.log(alpha) < math.log(UNDERFLOW_FLOOR):
        safe = min_safe_alpha(horizon)
        raise NumericalGuardError(
            f"alpha={alpha:.6g} underflows over a diameter bound of {horizon:g}; "
            f"use alpha >= {safe:.6g} or recompute the exact diameter",
            min_safe_alpha=safe,
        )
    edges = w > 0
    p_alpha = np.zeros_like(w)
    p_alpha[edges] = p.p[edges] * np.power(alpha, w[edges])
    p_alpha.setflags(write=False)
    w = w.copy()
    w.setflags(write=False)
    return EvaporatedChain(p_alpha, alpha, p, w)


def alpha_bound(d_max: int, L_max: float, delta: float) -> float:
    """Largest evaporation factor that keeps the distance error below ``delta / d_max``:
    ``(1 / (d_max ** (L_max + 1) - d_max + 1)) ** (1 / delta)``.
    """
    if d_max < 1 or L_max < 1 or delta <= 0:
        raise ValueError(f"need d_max >= 1, L_max >= 1, delta > 0 (got {d_max}, {L_max}, {delta})")
    d = int(d_max)
    if float(L_max).is_integer():
        denom = d ** (int(L_max) + 1) - d + 1
        log_denom = math.log(denom)
    else:
        log_denom = math.log(d ** (L_max + 1) - d + 1)
    log_alpha = -log_denom / delta
    if log_alpha < math.log(np.finfo(float).tiny):
        raise NumericalGuardError(
            f"alpha bound exp({log_alpha:.4g}) underflows double precision; "
            "use the exact diameter or a smaller graph")
    return math.exp(log_alpha)


def policy_alpha_bound(d_max: int, p_min: float, L_max: float, delta: float) -> float:
    """``alpha_bound`` for a chain whose smallest edge probability is ``p_min``.

    ``alpha_bound`` assumes every edge is taken with probability at least
    ``1 / d_max``, which only the uniform policy guarantees. Replacing that
    floor by ``p_min`` keeps the error below ``delta / d_max``:
    ``a = 1 / (d_max * (p_min ** -L_max - 1) + 1)`` with ``a = alpha ** delta``.
    """
    if not 0 < p_min <= 1:
        raise ValueError(f"p_min must lie in (0, 1], got {p_min}")
    if p_min * d_max >= 1 - 1e-12:
        return alpha_bound(d_max, L_max, delta)
    if d_max < 1 or L_max < 1 or delta <= 0:
        raise ValueError(f"need d_max >= 1, L_max >= 1, delta > 0 (got {d_max}, {L_max}, {delta})")
    x = -L_max * math.log(p_min)
    log_denom = math.log(d_max) + x + math.log1p(math.exp(-x) * (1.0 / d_max - 1.0))
    log_alpha = -log_denom / delta
    if log_alpha < math.log(np.finfo(float).tiny):
        raise NumericalGuardError(
            f"alpha bound exp({log_alpha:.4g}) underflows double precision; "
            "use the exact diameter, the uniform policy or a smaller graph")
    return math.exp(log_alpha)


def error_upper_bound(alpha: float, delta: float, d_max: int, L_max: float) -> float:
    """Worst-case distance error ``delta * a / (1 - a) * (d_max ** L_max - 1)``, ``a = alpha ** delta``."""
    if alpha >= 1.0:
        raise ValueError("the error bound diverges at alpha = 1")
    a = alpha ** delta
    return delta * a / (1.0 - a) * (float(d_max) ** L_max - 1.0)


@dataclass(frozen=True, eq=False)
class EdgeProbabilities:
    """Routing probabilities toward ``target`` for one evaporation factor.

    ``cp`` maps each edge ``(i, j)`` leaving a reachable node to its
    probability; unreachable nodes and the target emit nothing.
    """

    target: int
    cp: dict[tuple[int, int], float]
    reachable: np.ndarray = field(repr=False)

    def row(self, i: int) -> dict[int, float]:
        return {j: v for (a, j), v in self.cp.items() if a == i}

    def row_sums(self) -> dict[int, float]:
        sums: dict[int, float] = {}
        for (i, _), v in self.cp.items():
            sums[i] = sums.get(i, 0.0) + v
        return sums

    def successor(self, i: int) -> int | None:
        """Highest-probability out-neighbour, smallest id on ties."""
        row = self.row(i)
        if not row:
            return None
        return min(row, key=lambda j: (-row[j], j))


def _edge_probs(p_alpha: np.ndarray, mass: np.ndarray, t: int, floor: float = 0.0) -> EdgeProbabilities:
    reach = mass > floor
    reach[t] = True
    cp = {}
    src, dst = np.nonzero(p_alpha)
    for i, j in zip(src.tolist(), dst.tolist()):
        if i == t or not reach[i] or mass[j] <= floor:
            continue
        cp[(i, j)] = float(p_alpha[i, j] * mass[j] / mass[i])
    return EdgeProbabilities(t, cp, reach)


def absorption_column(chain, t: int) -> np.ndarray:
    """``Q_i^{t, not sink}`` for every node, via ``F P_TA``."""
    return markov.avoidance_absorption(chain, t)


def transform_chain(chain, q: np.ndarray, t: int | None = None) -> EdgeProbabilities:
    """``P_ij(alpha) Q_j / Q_i`` from an absorption column ``q`` (``q[t] == 1``)."""
    q = np.asarray(q, dtype=float)
    if t is None:
        t = int(np.flatnonzero(q == 1.0)[0])
    return _edge_probs(markov.as_matrix(chain), q, t)


def evaporation_fundamental(chain) -> np.ndarray:
    """``(I - P(alpha))^-1`` over all original nodes."""
    return markov.fundamental(chain, ()).f


def edge_probabilities(chain, f_o, t: int) -> EdgeProbabilities:
    """``P_ij(alpha) F_jt / F_it`` from the sink-absorbing fundamental matrix."""
    f_o = np.asarray(getattr(f_o, "f", f_o), dtype=float)
    return _edge_probs(markov.as_matrix(chain), f_o[:, t].copy(), t)


@dataclass
class ContinuumPoint:
    alpha: float
    probabilities: EdgeProbabilities
    flows: np.ndarray
    cost: markov.Avoidance
    error: np.ndarray | None = None


@dataclass
class ContinuumReport:
    target: int
    points: list[ContinuumPoint]

    @property
    def alphas(self) -> list[float]:
        return [pt.alpha for pt in self.points]

    def costs(self, s: int) -> list[float | None]:
        return [pt.cost.get(s) for pt in self.points]

    def to_json(self) -> dict:
        blocks = []
        for pt in self.points:
            n = len(pt.cost.values)
            block = {
                "alpha": pt.alpha,
                "edges": [{"src": i, "dst": j, "p": v}
                          for (i, j), v in sorted(pt.probabilities.cp.items())],
                "cost": [None if not pt.cost.reachable[s] else float(pt.cost.values[s])
                         for s in range(n)],
                "flows": pt.flows.tolist(),
            }
            if pt.error is not None:
                block["error"] = [None if not math.isfinite(e) else float(e) for e in pt.error]
            blocks.append(block)
        return {"target": self.target, "alphas": self.alphas, "blocks": blocks}

    def dump_json(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def to_dot(self, index: int) -> str:
        pt = self.points[index]
        lines = [f"digraph continuum {{", f'  label="alpha={pt.alpha:g}, target={self.target}";',
                 f"  {self.target} [shape=doublecircle];"]
        for (i, j), v in sorted(pt.probabilities.cp.items()):
            if v < 1e-9:
                continue
            lines.append(f'  {i} -> {j} [label="{v:.4f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def write_dot(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, pt in enumerate(self.points):
            path = directory / f"continuum_t{self.target}_alpha{pt.alpha:.6g}.dot"
            path.write_text(self.to_dot(k), encoding="utf-8")
            paths.append(path)
        return paths


def excess_error(chain, w, t: int, distance: np.ndarray) -> np.ndarray:
    """``U_s(alpha) - L_st`` accumulated from nonnegative per-edge excesses.

    For a routing step ``s -> j`` the excess ``w_sj + L_jt - L_st`` is never
    negative, so summing it along the transformed chain gives the error
    without the cancellation of subtracting two nearly equal costs.
    Unreachable nodes get ``inf``.
    """
    p = markov.as_matrix(chain)
    w = np.asarray(getattr(w, "adjacency", w), dtype=float)
    q = markov.avoidance_absorption(p, t)
    reach = (q > 0) & np.isfinite(distance)
    reach[t] = True
    n = p.shape[0]
    idx = [i for i in range(n) if i != t and reach[i]]
    out = np.full(n, math.inf)
    out[t] = 0.0
    if not idx:
        return out
    dist = np.where(np.isfinite(distance), distance, 0.0)
    cp = np.zeros((n, n))
    excess = np.zeros((n, n))
    for i in idx:
        for j in np.flatnonzero(p[i]):
            if q[j] > 0:
                cp[i, j] = p[i, j] * q[j] / q[i]
                excess[i, j] = max(w[i, j] + dist[j] - dist[i], 0.0)
    c = (cp * excess).sum(axis=1)[idx]
    a = np.eye(len(idx)) - cp[np.ix_(idx, idx)]
    # the exact solution is nonnegative; LU can leave -1e-28 style noise
    out[idx] = np.maximum(np.linalg.solve(a, c), 0.0)
    return out


def continuum_sweep(g: Graph, t: int, alphas, policy: Policy | str = Policy.DEGREE_WEIGHTED,
                    reference: bool = False) -> ContinuumReport:
    """Edge probabilities, node flows and avoidance costs toward ``t`` for each alpha.

    ``flows`` holds the avoidance fundamental matrix (row ``s`` gives the
    expected visits to each node on walks that reach ``t``). With
    ``reference=True`` each point also carries the distance error against
    exact shortest paths.
    """
    tm = transition_matrix(g, policy)
    distance = None
    if reference:
        from .reference import dijkstra_reduced
        distance = dijkstra_reduced(g, t)[0]
    points = []
    for alpha in alphas:
        chain = evaporate(tm, alpha=alpha)
        q = absorption_column(chain, t)
        probs = transform_chain(chain, q, t)
        flows = markov.avoidance_fundamental(chain, t)
        cost = markov.avoidance_hitting_cost(chain, g.adjacency, t)
        err = excess_error(chain, g.adjacency, t, distance) if reference else None
        points.append(ContinuumPoint(float(alpha), probs, flows.values, cost, err))
    return ContinuumReport(t, points)


def default_grid(g: Graph) -> list[float]:
    """``[alpha_bound, 0.3, 0.6, 0.9, 1.0]`` for the graph's own parameters."""
    return [alpha_bound(max(g.d_max, 1), max(g.diameter_bound, 1.0), g.delta), 0.3, 0.6, 0.9, 1.0]
