"""Gauss-Jacobi rules, the Duffy transform and Stroud conical quadrature.

Pulled back through the Duffy map, the degree-n Bernstein basis factors as

    B^n_alpha(x(t)) = B^n_{a0}(t1) * B^{n-a0}_{a1}(t2) * ...

(a ragged tensor product), so evaluation at the Stroud points and the
transposed moment computation both cost O(n^{d+1}) by sweeping one
direction at a time.

Value arrays over the Stroud grid have shape ``(q,) * d + batch`` with t1
the slowest axis and t_d the fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, pi

import numpy as np

from .counters import OpCounter
from .multiindex import block_offsets, dim

__all__ = [
    "GaussJacobiRule",
    "StroudRule",
    "gauss_jacobi",
    "stroud_rule",
    "facet_rule",
    "duffy",
    "bernstein_1d",
    "eval_at_stroud",
    "moments_from_values",
]


@dataclass(frozen=True)
class GaussJacobiRule:
    """Gauss rule on [0, 1] for the weight ``(1 - t)**a``."""

    q: int
    a: int
    nodes: np.ndarray
    weights: np.ndarray


def _jacobi(n: int, alpha: float, beta: float, x: float) -> tuple[float, float]:
    """P_n^{(alpha, beta)}(x) and its derivative via the three-term recurrence."""

    def p(n, al, be):
        p0, p1 = 1.0, 0.5 * ((al + be + 2.0) * x + al - be)
        if n == 0:
            return p0
        for k in range(2, n + 1):
            s = 2 * k + al + be
            a1 = 2 * k * (k + al + be) * (s - 2)
            a2 = (s - 1) * (al * al - be * be)
            a3 = (s - 2) * (s - 1) * s
            a4 = 2 * (k + al - 1) * (k + be - 1) * s
            p0, p1 = p1, ((a2 + a3 * x) * p1 - a4 * p0) / a1
        return p1

    val = p(n, alpha, beta)
    der = 0.0 if n == 0 else 0.5 * (n + alpha + beta + 1) * p(n - 1, alpha + 1, beta + 1)
    return val, der


@lru_cache(maxsize=None)
def gauss_jacobi(q: int, a: int) -> GaussJacobiRule:
    """q-point Gauss rule for ``int_0^1 (1 - t)^a f(t) dt``.

    Roots of P_q^{(a, 0)} are found by Newton iteration with deflation
    against the roots already found, starting from Chebyshev-Gauss points.
    Exact for polynomial f of degree ``<= 2q - 1``.
    """
    if q < 1 or a < 0:
        raise ValueError(f"need q >= 1 and a >= 0, got q={q}, a={a}")
    x = np.zeros(q)
    for k in range(q):
        r = -np.cos((2 * k + 1) * pi / (2 * q))
        if k > 0:
            r = 0.5 * (r + x[k - 1])
        for _ in range(100):
            val, der = _jacobi(q, a, 0.0, r)
            s = sum(1.0 / (r - x[j]) for j in range(k))
            delta = -val / (der - s * val)
            r += delta
            if abs(delta) < 1e-15:
                break
        x[k] = r
    x.sort()
    der = np.array([_jacobi(q, a, 0.0, r)[1] for r in x])
    # weight on [-1, 1] is 2^{a+1} / ((1 - x^2) P'^2); the map to [0, 1]
    # contributes 2^{-(a+1)}
    w = 1.0 / ((1.0 - x * x) * der * der)
    t = 0.5 * (1.0 + x)
    t.flags.writeable = False
    w.flags.writeable = False
    return GaussJacobiRule(q, a, t, w)


def duffy(t) -> np.ndarray:
    """Map points of the unit d-cube to barycentric coordinates.

    *t* has shape ``(..., d)``; the result has shape ``(..., d + 1)``.
    """
    t = np.asarray(t, dtype=float)
    d = t.shape[-1]
    lam = np.empty(t.shape[:-1] + (d + 1,))
    rest = np.ones(t.shape[:-1])
    for i in range(d):
        lam[..., i] = t[..., i] * rest
        rest = rest - lam[..., i]
    lam[..., d] = rest
    return lam


def bernstein_1d(m: int, t) -> np.ndarray:
    """Table ``B^m_a(t_k) = C(m, a) t^a (1 - t)^(m - a)`` of shape (m+1, len(t))."""
    t = np.asarray(t, dtype=float)
    a = np.arange(m + 1)[:, None]
    binom = np.array([comb(m, k) for k in range(m + 1)], dtype=float)[:, None]
    return binom * t[None, :] ** a * (1.0 - t[None, :]) ** (m - a)


@dataclass
class StroudRule:
    """Stroud conical rule on the unit right d-simplex.

    Direction i (1-based) uses the Gauss-Jacobi rule with exponent ``d - i``.
    ``weights`` is the composite ``(q,) * d`` weight grid; it sums to 1/d!.
    """

    d: int
    q: int
    lines: tuple[GaussJacobiRule, ...]
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def weights(self) -> np.ndarray:
        w = np.ones(())
        for line in self.lines:
            w = np.multiply.outer(w, line.weights)
        return w

    @property
    def cube_points(self) -> np.ndarray:
        grids = np.meshgrid(*[line.nodes for line in self.lines], indexing="ij")
        return np.stack(grids, axis=-1) if grids else np.zeros((0,))

    @property
    def points(self) -> np.ndarray:
        """Barycentric coordinates of the grid, shape ``(q,) * d + (d + 1,)``."""
        if self.d == 0:
            return np.ones((1,))
        return duffy(self.cube_points)

    def line(self, dcur: int) -> GaussJacobiRule:
        """Rule used by the sweep while *dcur* directions remain."""
        return self.lines[self.d - dcur]

    def table(self, dcur: int, m: int) -> np.ndarray:
        key = (dcur, m)
        if key not in self._tables:
            self._tables[key] = bernstein_1d(m, self.line(dcur).nodes)
        return self._tables[key]


def stroud_rule(d: int, q: int) -> StroudRule:
    if d < 0 or q < 1:
        raise ValueError(f"need d >= 0 and q >= 1, got d={d}, q={q}")
    return StroudRule(d, q, tuple(gauss_jacobi(q, d - i) for i in range(1, d + 1)))


def facet_rule(d: int, q: int) -> StroudRule:
    """Stroud rule on the (d-1)-simplex, for facet integrals."""
    if d < 1:
        raise ValueError("facets need d >= 1")
    return stroud_rule(d - 1, q)


def _eval(c, dcur, m, rule, counter):
    if dcur == 0:
        return c[0]
    tab = rule.table(dcur, m)
    if dcur == 1:
        sub = c
    else:
        offs = block_offsets(dcur, m)
        sub = np.stack([_eval(c[offs[a]:offs[a + 1]], dcur - 1, m - a, rule, counter)
                        for a in range(m + 1)])
    if counter is not None:
        counter.sumfact += tab.size * (sub.size // (m + 1))
    return np.tensordot(tab.T, sub, axes=1)


def eval_at_stroud(c, d: int, n: int, rule: StroudRule,
                   counter: OpCounter | None = None) -> np.ndarray:
    """Values of a degree-n B-form at every Stroud point.

    *c* has shape ``(dim(d, n),) + batch``; the result has shape
    ``(q,) * d + batch``.
    """
    c = np.asarray(c, dtype=float)
    if rule.d != d:
        raise ValueError(f"rule is for d={rule.d}, coefficients for d={d}")
    if c.shape[0] != dim(d, n):
        raise ValueError(f"expected {dim(d, n)} coefficients, got {c.shape[0]}")
    return _eval(c, d, n, rule, counter)


def _moments(h, dcur, m, rule, counter):
    if dcur == 0:
        return h[None]
    tab = rule.table(dcur, m) * rule.line(dcur).weights[None, :]
    if counter is not None:
        counter.sumfact += tab.size * (h.size // rule.q)
    g = np.tensordot(tab, h, axes=1)
    if dcur == 1:
        return g
    return np.concatenate([_moments(g[a], dcur - 1, m - a, rule, counter)
                           for a in range(m + 1)])


def moments_from_values(g, d: int, n: int, rule: StroudRule,
                        counter: OpCounter | None = None) -> np.ndarray:
    """Stroud approximation of ``int_{S_d} g B^n_alpha`` for every alpha.

    This is the exact transpose of :func:`eval_at_stroud` with respect to
    the weighted grid inner product.  Integrals are over the reference
    simplex; physical cells scale by ``|T| d!``.
    """
    g = np.asarray(g, dtype=float)
    if rule.d != d or g.shape[:d] != (rule.q,) * d:
        raise ValueError("value grid does not match the quadrature rule")
    return _moments(g, d, n, rule, counter)
