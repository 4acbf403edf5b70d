"""Distance sensitivity oracle: one stored ``(I - P(alpha))^-1`` answers
``(*, t, F)`` replacement-path queries for any failure set ``F``.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import struct
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import crcmod.predefined
import numpy as np
import scipy.linalg as sla

from . import markov, precision
from .errors import (ChecksumError, NumericalGuardError, PersistenceError, QueryError,
                     RoundingError, TruncatedFileError, VersionError)
from .evaporation import alpha_bound, evaporate, policy_alpha_bound
from .graph import Graph, Policy, transition_matrix

FORMAT_VERSION = 1
MAGIC = b"AVOR"
UNREACHABLE_FLOOR = 1e-250
# log-score gap below which two routing choices count as tied
TIE_LOG_TOL = 1e-9
RESIDUAL_LIMIT = 1e-9
_HEADER = struct.Struct("<4sIQddQQ")
_CRC = struct.Struct("<Q")
crc64 = crcmod.predefined.mkCrcFun("crc-64-we")


class UnsafeAlphaWarning(UserWarning):
    """Oracle was built with an evaporation factor above the safe bound."""


def chain_bound(d_max: int, diameter_bound: float, delta: float, p_min: float | None = None) -> float:
    """Safe evaporation bound, tightened when some edge probability is
    below ``1 / d_max`` (``p_min``); 1 for edgeless or trivial graphs."""
    if d_max < 1 or diameter_bound < 1:
        return 1.0
    if p_min is None:
        return alpha_bound(d_max, diameter_bound, delta)
    return policy_alpha_bound(d_max, p_min, diameter_bound, delta)


def safe_alpha(d_max: int, diameter_bound: float, delta: float, p_min: float | None = None) -> float:
    """Default evaporation factor for a graph.

    The bound itself is used unless it equals 1 (every node has a single
    out-edge), where half is taken so ``I - P(alpha)`` stays invertible.
    """
    bound = chain_bound(d_max, diameter_bound, delta, p_min)
    return 0.5 if bound >= 1.0 else bound


def smallest_edge_probability(p: np.ndarray) -> float | None:
    edges = p[p > 0]
    return float(edges.min()) if edges.size else None


@dataclass(frozen=True, eq=False)
class Oracle:
    """Preprocessed oracle; immutable once built or loaded."""

    f_o: np.ndarray = field(repr=False)
    p_alpha: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    alpha: float
    delta: float
    d_max: int
    diameter_bound: int
    version: int = FORMAT_VERSION
    build_seconds: float | None = field(default=None, compare=False)
    extended: precision.ExtendedMatrix | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.f_o.shape[0]

    @cached_property
    def p_min(self) -> float | None:
        """Smallest edge probability of the chain before evaporation."""
        src, dst, vals = self.edge_arrays
        if not vals.size:
            return None
        return float((vals / np.power(self.alpha, self.weights[src, dst])).min())

    @cached_property
    def bound(self) -> float:
        """Safe alpha bound; 0.0 when it underflows double precision."""
        try:
            return chain_bound(self.d_max, self.diameter_bound, self.delta, self.p_min)
        except NumericalGuardError:
            return 0.0

    @property
    def safe(self) -> bool:
        return self.alpha <= self.bound * (1 + 1e-12)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src, dst = np.nonzero(self.p_alpha)
        return src, dst, self.p_alpha[src, dst]

    @property
    def storage_bytes(self) -> int:
        return self.f_o.nbytes

    def residual(self) -> float:
        a = np.eye(self.n) - self.p_alpha
        return float(np.abs(self.f_o @ a - np.eye(self.n)).max(initial=0.0))


def with_precision(o: Oracle, bits: int | str | None) -> Oracle:
    """Copy of ``o`` carrying an Arb twin of its matrix at ``bits``
    (``"auto"`` sizes it from the chain; ``None`` drops it)."""
    if bits is None:
        return dataclasses.replace(o, extended=None)
    if bits == "auto":
        bits = precision.required_bits(o.p_alpha, o.weights, o.alpha)
    return dataclasses.replace(o, extended=precision.ExtendedMatrix(o.p_alpha, int(bits)))


def preprocess(g: Graph, alpha: float | None = None, *, policy: Policy | str = Policy.DEGREE_WEIGHTED,
               unsafe: bool = False, bits: int | str | None = None) -> Oracle:
    """Build and verify ``F_o = (I - P(alpha))^-1``.

    ``alpha`` defaults to the safe bound for ``g``'s maximum out-degree,
    diameter bound and granularity, tightened when the policy gives some
    edge a probability below ``1 / d_max``. A larger value needs
    ``unsafe=True``.

    Double precision loses replacement paths that are much longer than the
    paths they replace. ``bits="auto"`` (or an explicit bit count) also
    keeps an arbitrary-precision copy that queries use instead.
    """
    started = time.perf_counter()
    d_max, horizon = g.d_max, g.diameter_bound
    tm = transition_matrix(g, policy)
    p_min = smallest_edge_probability(tm.p)
    if alpha is None:
        alpha = safe_alpha(d_max, horizon, g.delta, p_min)
    elif not unsafe:
        bound = chain_bound(d_max, horizon, g.delta, p_min)
        if alpha > bound * (1 + 1e-12):
            raise ValueError(f"alpha={alpha:g} exceeds the safe bound {bound:.6g}; pass unsafe=True to override")
    chain = evaporate(tm, alpha=alpha)
    try:
        fm = markov.fundamental(chain, ())
    except markov.SingularSystemError as exc:
        raise markov.SingularSystemError(
            f"I - P(alpha) is singular at alpha={alpha:g} ({exc}); choose alpha < 1", exc.nodes) from None
    f_o = np.array(fm.f)
    f_o.setflags(write=False)
    oracle = Oracle(
        f_o=f_o,
        p_alpha=chain.p_alpha,
        weights=chain.weights,
        alpha=float(alpha),
        delta=g.delta,
        d_max=d_max,
        diameter_bound=int(math.ceil(horizon)),
        build_seconds=time.perf_counter() - started,
    )
    res = oracle.residual()
    if res >= RESIDUAL_LIMIT:
        raise NumericalGuardError(f"inversion residual {res:.3g} exceeds {RESIDUAL_LIMIT:g}")
    if bits is not None:
        oracle = with_precision(oracle, bits)
    return oracle


class Status(str, enum.Enum):
    OK = "ok"
    UNREACHABLE = "unreachable"
    FAILED = "failed-node"


@dataclass
class ReplacementResult:
    target: int
    failures: tuple[int, ...]
    successor: list[int | None]
    distance: list[float | None]
    raw_cost: list[float | None]
    status: list[Status]
    mass: np.ndarray = field(repr=False, default=None)

    @property
    def tree_edges(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j in enumerate(self.successor) if j is not None}

    def path(self, s: int) -> list[int]:
        """Node sequence from ``s`` to the target along successors."""
        if self.status[s] is not Status.OK:
            raise ValueError(f"node {s} has status {self.status[s].value}")
        nodes = [s]
        while nodes[-1] != self.target:
            nodes.append(self.successor[nodes[-1]])
            if len(nodes) > len(self.successor):
                raise NumericalGuardError(f"successor cycle from node {s}")
        return nodes

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "failures": list(self.failures),
            "nodes": [
                {"id": i, "status": self.status[i].value, "successor": self.successor[i],
                 "distance": self.distance[i], "raw_cost": self.raw_cost[i]}
                for i in range(len(self.status))
            ],
        }

    def dump_json(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def to_dot(self, weights=None) -> str:
        lines = ["digraph replacement {", f"  {self.target} [shape=doublecircle];"]
        for i in self.failures:
            lines.append(f"  {i} [style=filled, fillcolor=gray];")
        for i, j in sorted(self.tree_edges):
            label = f' [label="{weights[i][j]:g}"]' if weights is not None else ""
            lines.append(f"  {i} -> {j}{label};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _check_query(n: int, t: int, failures) -> tuple[int, ...]:
    if not 0 <= t < n:
        raise QueryError(f"target {t} outside [0, {n})")
    failures = tuple(sorted({int(x) for x in failures}))
    bad = [x for x in failures if not 0 <= x < n]
    if bad:
        raise QueryError(f"failure ids {bad} outside [0, {n})")
    if t in failures:
        raise QueryError(f"target {t} in failure set")
    return failures


def target_mass(o: Oracle, t: int, failures: tuple[int, ...]) -> np.ndarray:
    """Column ``t`` of the fundamental matrix that also absorbs ``failures``.

    Only the ``f x f`` block of failed nodes is factorised.
    """
    col = np.array(o.f_o[:, t])
    if failures:
        fl = list(failures)
        lu = markov.lu_checked(o.f_o[np.ix_(fl, fl)], f"failure block {fl}")
        col -= o.f_o[:, fl] @ sla.lu_solve(lu, o.f_o[fl, t], check_finite=False)
        col[fl] = 0.0
    return col


def query(o: Oracle, t: int, failures=(), *, raw_cost: bool = True) -> ReplacementResult:
    """Replacement shortest-path tree toward ``t`` avoiding ``failures``."""
    n = o.n
    failures = _check_query(n, t, failures)
    if not o.safe:
        warnings.warn(f"oracle alpha={o.alpha:g} exceeds the safe bound {o.bound:.6g}",
                      UnsafeAlphaWarning, stacklevel=2)
    failed = np.zeros(n, dtype=bool)
    failed[list(failures)] = True
    if o.extended is not None:
        balls = o.extended.target_mass(t, failures)
        live = np.array([precision.positive(x) for x in balls]) & ~failed
        log_mass = np.array([precision.log_mid(x) if live[i] else -np.inf
                             for i, x in enumerate(balls)])
        mass = np.array([float(x.mid()) for x in balls])
    else:
        balls = None
        mass = target_mass(o, t, failures)
        live = (mass > UNREACHABLE_FLOOR) & ~failed
        log_mass = np.full(n, -np.inf)
        log_mass[live] = np.log(mass[live])

    # routing probabilities are P_ij(alpha) F_jt / F_it; the row factor does
    # not change the argmax, so rank on log P_ij(alpha) + log F_jt
    src, dst, pv = o.edge_arrays
    keep = live[src] & live[dst] & (src != t)
    successor = _argmax_successors(n, src[keep], dst[keep], np.log(pv[keep]) + log_mass[dst[keep]])
    status = [Status.OK] * n
    for i in range(n):
        if failed[i]:
            status[i] = Status.FAILED
        elif i != t and successor[i] is None:
            status[i] = Status.UNREACHABLE
    result = ReplacementResult(t, failures, successor, [None] * n, [None] * n, status, mass)
    result.distance = _tree_sums(result, o.weights)
    if raw_cost:
        if balls is not None:
            costs = o.extended.raw_costs(t, failures, balls, live | (np.arange(n) == t),
                                         o.p_alpha * o.weights)
        else:
            costs = _raw_costs(o, t, failures, mass, live)
        result.raw_cost = [float(costs[i]) if status[i] is Status.OK else None for i in range(n)]
    return result


def _argmax_successors(n: int, src: np.ndarray, dst: np.ndarray, score: np.ndarray) -> list[int | None]:
    """Best-scoring out-neighbour per source; near-equal scores go to the smallest id."""
    successor: list[int | None] = [None] * n
    if not len(src):
        return successor
    order = np.argsort(src, kind="stable")
    src, dst, score = src[order], dst[order], score[order]
    starts = np.flatnonzero(np.r_[True, src[1:] != src[:-1]])
    best = np.maximum.reduceat(score, starts)
    group = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(src)]))
    cand = np.where(score >= best[group] - TIE_LOG_TOL, dst, n)
    for i, j in zip(src[starts].tolist(), np.minimum.reduceat(cand, starts).tolist()):
        successor[i] = j
    return successor


def _raw_costs(o: Oracle, t: int, failures: tuple[int, ...], mass: np.ndarray,
               live: np.ndarray) -> np.ndarray:
    """Avoidance hitting cost toward ``t`` that avoids ``failures`` and the sink.

    ``U_i Q_i = sum_m F'_im g_m`` with ``g_m = sum_j P_mj(alpha) w_mj Q_j``
    and ``F'`` the fundamental matrix that also absorbs ``t`` and the
    failures; ``F'`` is applied through the same block update as the mass.
    """
    q = np.where(live, mass / mass[t], 0.0)
    q[t] = 1.0
    g = (o.p_alpha * o.weights) @ q
    absorbed = list(failures) + [t]
    fg = o.f_o @ g
    block = o.f_o[np.ix_(absorbed, absorbed)]
    lu = markov.lu_checked(block, "absorbed block")
    fg -= o.f_o[:, absorbed] @ sla.lu_solve(lu, fg[absorbed], check_finite=False)
    out = np.zeros(o.n)
    np.divide(fg, q, out=out, where=live & (q > 0))
    out[t] = 0.0
    return out


def _tree_sums(result: ReplacementResult, weights) -> list[float | None]:
    n = len(result.successor)
    dist: list[float | None] = [None] * n
    dist[result.target] = 0.0
    for s in range(n):
        if result.status[s] is not Status.OK or dist[s] is not None:
            continue
        chain = []
        node = s
        seen = set()
        while dist[node] is None:
            if node in seen:
                raise NumericalGuardError(f"successor cycle through node {node}")
            seen.add(node)
            chain.append(node)
            node = result.successor[node]
            if node is None:
                raise NumericalGuardError(f"successor chain from {s} stops before the target")
        total = dist[node]
        for i in reversed(chain):
            total += float(weights[i][result.successor[i]])
            dist[i] = total
    return dist


def tree_distances(result: ReplacementResult, g) -> list[float | None]:
    """Sum edge weights along successor chains; ``None`` off the tree."""
    weights = getattr(g, "adjacency", g)
    return _tree_sums(result, weights)


def round_distance(u: float, delta: float, d_max: int) -> float:
    """Round a raw avoidance cost down to its multiple of ``delta``.

    Raises ``RoundingError`` when the remainder falls outside
    ``(-delta / (2 d_max), delta / d_max)``.
    """
    if u < 0:
        raise ValueError(f"raw cost must be nonnegative, got {u}")
    half = delta / (2 * d_max)
    k = math.floor((u + half) / delta)
    rem = u - k * delta
    if not (-half < rem < delta / d_max):
        raise RoundingError(
            f"raw cost {u:g} is {rem:g} above {k * delta:g}, outside the "
            f"window ({-half:g}, {delta / d_max:g}); alpha is too large for this instance")
    return k * delta


def to_bytes(o: Oracle) -> bytes:
    header = _HEADER.pack(MAGIC, o.version, o.n, o.alpha, o.delta, o.d_max, o.diameter_bound)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (o.f_o, o.p_alpha, o.weights))
    payload = header + body
    return payload + _CRC.pack(crc64(payload))


def from_bytes(data: bytes) -> Oracle:
    if len(data) < _HEADER.size + _CRC.size:
        raise TruncatedFileError(f"oracle file too short ({len(data)} bytes)")
    magic, version, n, alpha, delta, d_max, diameter_bound = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise PersistenceError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported oracle format version {version} (expected {FORMAT_VERSION})")
    block = 8 * n * n
    expected = _HEADER.size + 3 * block + _CRC.size
    if len(data) != expected:
        if len(data) < expected:
            raise TruncatedFileError(f"oracle file has {len(data)} bytes, expected {expected}")
        raise ChecksumError(f"oracle file has {len(data)} bytes, expected {expected}")
    payload, (stored,) = data[:-_CRC.size], _CRC.unpack_from(data, len(data) - _CRC.size)
    if crc64(payload) != stored:
        raise ChecksumError("oracle checksum mismatch")
    arrays = []
    for k in range(3):
        start = _HEADER.size + k * block
        a = np.frombuffer(data, dtype="<f8", count=n * n, offset=start).reshape(n, n).astype(float)
        a.setflags(write=False)
        arrays.append(a)
    return Oracle(f_o=arrays[0], p_alpha=arrays[1], weights=arrays[2], alpha=alpha,
                  delta=delta, d_max=d_max, diameter_bound=diameter_bound, version=version)


def save(o: Oracle, path) -> None:
    Path(path).write_bytes(to_bytes(o))


def load(path, bits: int | str | None = None) -> Oracle:
    o = from_bytes(Path(path).read_bytes())
    return with_precision(o, bits) if bits is not None else o
