"""Absorbing-chain metrics: fundamental matrix, hitting time/cost,
absorption probabilities, and their avoidance (conditioned) variants.

Matrices passed in may be plain arrays or any object exposing ``p`` or
``p_alpha``. Rows whose sum is below one leak the missing mass to an
implicit sink that is never materialised; it is always avoided.

Vectors are returned at full length ``n`` and indexed by node id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csgraph, csr_matrix

from .errors import SingularSystemError

PIVOT_FLOOR = 1e-12
# row mass below 1 - LEAK_TOL counts as leaking to the implicit sink
LEAK_TOL = 1e-14
# sizes of every square system factorised, newest last (instrumentation)
FACTORIZATIONS: deque[int] = deque(maxlen=4096)


def as_matrix(p) -> np.ndarray:
    for attr in ("p_alpha", "p"):
        inner = getattr(p, attr, None)
        if inner is not None:
            return np.asarray(inner, dtype=float)
    return np.asarray(p, dtype=float)


def expected_cost(p, w) -> np.ndarray:
    """``r_m = sum_i p_mi w_mi`` for every node."""
    p = as_matrix(p)
    w = np.asarray(getattr(w, "adjacency", w), dtype=float)
    return (p * w).sum(axis=1)


def lu_checked(a: np.ndarray, what: str = "matrix"):
    """LU factorisation that refuses pivots below ``PIVOT_FLOOR``."""
    FACTORIZATIONS.append(a.shape[0])
    lu, piv = sla.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < PIVOT_FLOOR:
        raise SingularSystemError(f"{what} is singular (smallest pivot {pivots.min():.3g})")
    return lu, piv


def trapped_nodes(p: np.ndarray, transient) -> list[int]:
    """Transient nodes from which no absorbing node or leak is reachable."""
    n = p.shape[0]
    transient = list(transient)
    is_t = np.zeros(n, dtype=bool)
    is_t[transient] = True
    sub = p[np.ix_(is_t, is_t)]
    # exits: nodes that leak or have an edge out of the transient block
    leaks = sub.sum(axis=1) < 1.0 - LEAK_TOL
    escapes = (p[np.ix_(is_t, ~is_t)] > 0).any(axis=1)
    ok = leaks | escapes
    queue = list(np.flatnonzero(ok))
    preds = [np.flatnonzero(sub[:, k] > 0) for k in range(len(transient))]
    while queue:
        k = queue.pop()
        for i in preds[k]:
            if not ok[i]:
                ok[i] = True
                queue.append(i)
    return [transient[k] for k in np.flatnonzero(~ok)]


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """``(I - P_TT)^-1`` over the transient block, with its node map.

    ``f[index[s], index[m]]`` is the expected number of visits to ``m``
    starting from ``s`` before absorption in ``absorbing`` (or leaking).
    """

    f: np.ndarray = field(repr=False)
    transient: tuple[int, ...]
    absorbing: tuple[int, ...]
    n: int
    index: dict[int, int] = field(repr=False)

    def entry(self, s: int, m: int) -> float:
        return float(self.f[self.index[s], self.index[m]])

    def column(self, m: int) -> np.ndarray:
        """Full-length column ``F[:, m]`` with zeros on absorbing rows."""
        out = np.zeros(self.n)
        out[list(self.transient)] = self.f[:, self.index[m]]
        return out

    def embed(self, vec: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.n, fill, dtype=float)
        out[list(self.transient)] = vec
        return out

    def residual(self, p) -> float:
        """``max |F (I - P_TT) - I|``."""
        p = as_matrix(p)
        idx = list(self.transient)
        a = np.eye(len(idx)) - p[np.ix_(idx, idx)]
        return float(np.abs(self.f @ a - np.eye(len(idx))).max(initial=0.0))


def _make(f, transient, absorbing, n) -> FundamentalMatrix:
    transient = tuple(int(i) for i in transient)
    f = np.asarray(f, dtype=float)
    f.setflags(write=False)
    return FundamentalMatrix(
        f=f,
        transient=transient,
        absorbing=tuple(sorted(int(a) for a in absorbing)),
        n=n,
        index={node: k for k, node in enumerate(transient)},
    )


def _reach_closure(pattern: np.ndarray) -> np.ndarray:
    """``out[i, j]`` is True when a walk ``i -> j`` exists (including ``i == j``)."""
    hops = csgraph.shortest_path(csr_matrix(pattern), unweighted=True)
    return np.isfinite(hops)


def fundamental(p, absorbing) -> FundamentalMatrix:
    """Dense LU inversion of ``I - P_TT``."""
    p = as_matrix(p)
    n = p.shape[0]
    absorbing = set(int(a) for a in absorbing)
    transient = [i for i in range(n) if i not in absorbing]
    trapped = trapped_nodes(p, transient)
    if trapped:
        raise SingularSystemError(
            f"nodes {trapped} never reach the absorbing set {sorted(absorbing)}", trapped)
    if not transient:
        return _make(np.zeros((0, 0)), transient, absorbing, n)
    a = np.eye(len(transient)) - p[np.ix_(transient, transient)]
    lu = lu_checked(a, "I - P_TT")
    f = sla.lu_solve(lu, np.eye(len(transient)), check_finite=False)
    # LU leaves ~1e-17 noise where no walk exists; restore the exact zeros
    f[~_reach_closure(a != 0)] = 0.0
    return _make(f, transient, absorbing, n)


def hitting_time(fm: FundamentalMatrix) -> np.ndarray:
    """Expected steps to absorption; 0 on absorbing nodes."""
    return fm.embed(fm.f.sum(axis=1))


def hitting_cost(fm: FundamentalMatrix, r) -> np.ndarray:
    """``U_s = sum_m F_sm r_m`` with ``r`` indexed by node id; 0 on absorbing nodes."""
    r = np.asarray(r, dtype=float)
    return fm.embed(fm.f @ r[list(fm.transient)])


@dataclass(frozen=True, eq=False)
class AbsorptionMatrix:
    q: np.ndarray = field(repr=False)
    transient: tuple[int, ...]
    absorbing: tuple[int, ...]

    def prob(self, s: int, a: int) -> float:
        if s in self.absorbing:
            return float(s == a)
        return float(self.q[self.transient.index(s), self.absorbing.index(a)])

    def column(self, a: int, n: int | None = None) -> np.ndarray:
        """Full-length ``Q[:, a]``: 1 at ``a``, 0 on other absorbing nodes."""
        n = n if n is not None else len(self.transient) + len(self.absorbing)
        out = np.zeros(n)
        out[list(self.transient)] = self.q[:, self.absorbing.index(a)]
        out[a] = 1.0
        return out


def absorption(fm: FundamentalMatrix, p) -> AbsorptionMatrix:
    """``Q = F P_TA``."""
    p = as_matrix(p)
    q = fm.f @ p[np.ix_(list(fm.transient), list(fm.absorbing))]
    return AbsorptionMatrix(q=q, transient=fm.transient, absorbing=fm.absorbing)


def absorption_from_fundamental(fm: FundamentalMatrix, j: int) -> np.ndarray:
    """Probability of hitting ``j`` before ``fm.absorbing``: ``F_ij / F_jj``."""
    if j not in fm.index:
        raise ValueError(f"node {j} is absorbing in this fundamental matrix")
    col = fm.column(j)
    return col / col[j]


def incremental_fundamental(fm: FundamentalMatrix, s2) -> FundamentalMatrix:
    """Fundamental matrix after also absorbing ``s2``, from a block update.

    ``F' = F_RR - F_R,S2 (F_S2,S2)^-1 F_S2,R`` over the remaining transient
    nodes R. Only a ``|s2| x |s2|`` system is factorised.
    """
    s2 = [int(x) for x in dict.fromkeys(s2)]
    overlap = [x for x in s2 if x not in fm.index]
    if overlap:
        raise ValueError(f"nodes {overlap} are already absorbing")
    if not s2:
        return fm
    cols = [fm.index[x] for x in s2]
    drop = set(s2)
    keep_nodes = [x for x in fm.transient if x not in drop]
    keep = [fm.index[x] for x in keep_nodes]
    block = fm.f[np.ix_(cols, cols)]
    lu = lu_checked(block, f"fundamental block over {s2}")
    correction = fm.f[np.ix_(keep, cols)] @ sla.lu_solve(lu, fm.f[np.ix_(cols, keep)],
                                                        check_finite=False)
    f = fm.f[np.ix_(keep, keep)] - correction
    return _make(f, keep_nodes, set(fm.absorbing) | drop, fm.n)


@dataclass(frozen=True, eq=False)
class Avoidance:
    """Result of an avoidance metric.

    ``values`` has one row per node (a vector or a matrix); ``reachable[s]``
    is False when ``s`` cannot reach the target without touching the
    avoided set, and such rows hold zeros rather than NaN.
    """

    values: np.ndarray = field(repr=False)
    reachable: np.ndarray = field(repr=False)

    def get(self, s: int):
        return self.values[s] if self.reachable[s] else None


def _target_chain(p, t: int, avoid):
    p = as_matrix(p)
    avoid = {int(a) for a in ([] if avoid is None else np.atleast_1d(avoid))}
    if t in avoid:
        raise ValueError(f"target {t} is also avoided")
    fm = fundamental(p, avoid | {t})
    q = np.zeros(p.shape[0])
    q[list(fm.transient)] = fm.f @ p[list(fm.transient), t]
    q[t] = 1.0
    return p, fm, q


def avoidance_absorption(p, t: int, avoid=None) -> np.ndarray:
    """``Q_s^{t, not avoid}`` for every node: probability of reaching ``t`` first."""
    return _target_chain(p, t, avoid)[2]


def avoidance_fundamental(p, t: int, avoid=None) -> Avoidance:
    """``F_sm^{t,avoid} Q_m / Q_s`` as a full ``n x n`` matrix.

    ``avoid`` is an optional node or node set; the implicit leak sink is
    avoided regardless. Rows and columns of ``t`` and of avoided nodes are
    zero.
    """
    p, fm, q = _target_chain(p, t, avoid)
    n = p.shape[0]
    idx = list(fm.transient)
    reach = q > 0
    reach[t] = True
    out = np.zeros((n, n))
    qs = q[idx]
    ratio = np.divide(1.0, qs, out=np.zeros_like(qs), where=qs > 0)
    out[np.ix_(idx, idx)] = fm.f * ratio[:, None] * qs[None, :]
    return Avoidance(out, reach)


def avoidance_fundamental_classical(p, t: int, avoid=None) -> Avoidance:
    """Same quantity rebuilt from the fundamental matrix that absorbs only
    the avoided set: ``F_mt (F_sm / F_st - F_tm / F_tt)``."""
    p = as_matrix(p)
    n = p.shape[0]
    avoid = {int(a) for a in ([] if avoid is None else np.atleast_1d(avoid))}
    fk = fundamental(p, avoid)
    full = np.zeros((n, n))
    idx = list(fk.transient)
    full[np.ix_(idx, idx)] = fk.f
    col_t = full[:, t]
    reach = col_t > 0
    reach[t] = True
    out = np.zeros((n, n))
    inner = [i for i in idx if i != t]
    for s in inner:
        if col_t[s] <= 0:
            continue
        out[s, inner] = full[inner, t] * (full[s, inner] / col_t[s] - full[t, inner] / full[t, t])
    return Avoidance(out, reach)


def avoidance_hitting_time(p, t: int, avoid=None) -> Avoidance:
    af = avoidance_fundamental(p, t, avoid)
    return Avoidance(af.values.sum(axis=1), af.reachable)


def avoidance_hitting_cost(p, w, t: int, avoid=None) -> Avoidance:
    """Expected cost to ``t`` conditioned on hitting it before the avoided set.

    ``r_m = sum_i p_mi w_mi Q_i / Q_m``; out-neighbours with ``Q_i = 0``
    contribute nothing.
    """
    p, fm, q = _target_chain(p, t, avoid)
    w = np.asarray(getattr(w, "adjacency", w), dtype=float)
    af = avoidance_fundamental(p, t, avoid)
    pq = (p * w) @ q
    r = np.divide(pq, q, out=np.zeros_like(q), where=q > 0)
    u = af.values @ r
    u[t] = 0.0
    return Avoidance(u, af.reachable)
