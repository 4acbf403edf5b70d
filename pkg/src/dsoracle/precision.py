"""Arbitrary-precision twin of the stored fundamental matrix.

The failure update subtracts the mass of walks through failed nodes from
the total walk mass. When the surviving walks are much longer than the
removed ones the result sits many orders of magnitude below the operands
and double precision returns zero or noise. Holding the matrix as Arb
balls at enough bits keeps every genuinely positive mass strictly away
from zero, so the sign test and the routing argmax stay exact.
"""

from __future__ import annotations

import math

import numpy as np
from flint import arb, arb_mat, ctx

from . import markov

GUARD_BITS = 64


def required_bits(p_alpha: np.ndarray, weights: np.ndarray, alpha: float) -> int:
    """Working precision that separates the smallest possible positive walk
    mass from rounding noise.

    Any finite replacement path is simple, so its mass is at least
    ``p_min ** (n - 1) * alpha ** H`` with ``H`` the sum of the ``n - 1``
    heaviest edge weights.
    """
    n = p_alpha.shape[0]
    edges = weights > 0
    if not edges.any() or n < 2:
        return 53 + GUARD_BITS
    p_plain = p_alpha[edges] / np.power(alpha, weights[edges])
    heaviest = np.sort(weights[edges])[::-1][: n - 1].sum()
    log2_mass = (n - 1) * math.log2(p_plain.min()) + heaviest * math.log2(alpha)
    return int(math.ceil(-log2_mass)) + int(math.ceil(math.log2(n))) + 53 + GUARD_BITS


class ExtendedMatrix:
    """``(I - P(alpha))^-1`` as an Arb ball matrix at ``bits`` of precision."""

    def __init__(self, p_alpha: np.ndarray, bits: int):
        self.bits = int(bits)
        self.n = p_alpha.shape[0]
        with _precision(self.bits):
            a = arb_mat([[arb(float(i == j)) - arb(float(p_alpha[i, j])) for j in range(self.n)]
                         for i in range(self.n)])
            markov.FACTORIZATIONS.append(self.n)
            self.f = a.inv()
            self.p_alpha = p_alpha

    def column(self, t: int) -> list:
        return [self.f[i, t] for i in range(self.n)]

    def target_mass(self, t: int, failures) -> list:
        """Column ``t`` after absorbing ``failures`` (an ``f x f`` solve)."""
        with _precision(self.bits):
            col = self.column(t)
            if not failures:
                return col
            fl = list(failures)
            block = arb_mat([[self.f[a, b] for b in fl] for a in fl])
            rhs = arb_mat([[self.f[a, t]] for a in fl])
            markov.FACTORIZATIONS.append(len(fl))
            y = block.solve(rhs)
            left = arb_mat([[self.f[i, b] for b in fl] for i in range(self.n)])
            corr = left * y
            out = [col[i] - corr[i, 0] for i in range(self.n)]
            for x in fl:
                out[x] = arb(0)
            return out

    def raw_costs(self, t: int, failures, mass: list, live: np.ndarray,
                  weighted: np.ndarray) -> np.ndarray:
        """Avoidance hitting costs, same algebra as the double-precision path."""
        with _precision(self.bits):
            q = [mass[i] / mass[t] if live[i] else arb(0) for i in range(self.n)]
            q[t] = arb(1)
            qv = arb_mat([[x] for x in q])
            wm = arb_mat([[arb(float(weighted[i, j])) for j in range(self.n)] for i in range(self.n)])
            g = wm * qv
            fg = self.f * g
            absorbed = list(failures) + [t]
            block = arb_mat([[self.f[a, b] for b in absorbed] for a in absorbed])
            markov.FACTORIZATIONS.append(len(absorbed))
            y = block.solve(arb_mat([[fg[a, 0]] for a in absorbed]))
            left = arb_mat([[self.f[i, b] for b in absorbed] for i in range(self.n)])
            corr = left * y
            out = np.zeros(self.n)
            for i in range(self.n):
                if live[i] and i != t:
                    out[i] = float(((fg[i, 0] - corr[i, 0]) / q[i]).mid())
            return out


def positive(x) -> bool:
    """True when the ball lies strictly above zero."""
    return bool(x > 0)


def log_mid(x) -> float:
    return float(x.log().mid())


class _precision:
    def __init__(self, bits: int):
        self.bits = bits

    def __enter__(self):
        self.saved = ctx.prec
        ctx.prec = self.bits

    def __exit__(self, *exc):
        ctx.prec = self.saved
