"""Bernstein-basis algebra on the d-simplex.

A polynomial of degree n is stored as its B-form: a coefficient array of
length ``dim(d, n)`` in the canonical multiindex order (see
:mod:`bernstein_dg.multiindex`), representing

    sum_alpha c_alpha * B^n_alpha,    B^n_alpha = n!/alpha! * b^alpha.

The array-level kernels accept extra trailing axes and treat them as a
batch, so one call can process every cell and field of a DG state.
Object arrays of :class:`fractions.Fraction` are handled exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .counters import OpCounter
from .multiindex import binom_mi, dim, enumerate_indices, index_array

__all__ = [
    "BForm",
    "GradientPattern",
    "degree_of",
    "eval_decasteljau",
    "elevate",
    "elevate_to",
    "elevate_transpose",
    "elevation_matrix",
    "gradient_pattern",
    "product_scale",
]


def degree_of(d: int, size: int) -> int:
    """Recover the degree n from ``size = dim(d, n)``."""
    n = 0
    while dim(d, n) < size:
        n += 1
    if dim(d, n) != size:
        raise ValueError(f"{size} coefficients is not a B-form size in d={d}")
    return n


@lru_cache(maxsize=None)
def _elevation_index(d: int, n: int):
    """Index maps for one elevation step from degree n-1 to n.

    Returns a tuple over directions i of ``(dst, num)`` where ``dst[r]`` is
    the degree-n rank of ``alpha + e_i`` for the degree-(n-1) index of rank
    r, and ``num[r] = alpha_i + 1``; the weight is ``num / n``.
    """
    lookup = {a: r for r, a in enumerate(enumerate_indices(d, n))}
    src = index_array(d, n - 1)
    out = []
    for i in range(d + 1):
        dst = np.empty(len(src), dtype=np.int64)
        for r, a in enumerate(map(tuple, src)):
            up = list(a)
            up[i] += 1
            dst[r] = lookup[tuple(up)]
        num = src[:, i] + 1
        dst.flags.writeable = False
        out.append((dst, num))
    return tuple(out)


def _weights(num: np.ndarray, n: int, exact: bool) -> np.ndarray:
    if exact:
        return np.array([Fraction(int(k), n) for k in num], dtype=object)
    return num / n


def _bcast(w: np.ndarray, ndim: int) -> np.ndarray:
    return w.reshape(w.shape + (1,) * (ndim - 1))


def elevate(c, d: int, n: int, counter: OpCounter | None = None) -> np.ndarray:
    """Raise B-form coefficients from degree ``n - 1`` to degree *n*.

    Each source coefficient feeds exactly ``d + 1`` targets with weight
    ``(alpha_i + 1) / n``.
    """
    if n < 1:
        raise ValueError("elevation target degree must be >= 1")
    c = np.asarray(c)
    if c.shape[0] != dim(d, n - 1):
        raise ValueError(f"expected {dim(d, n - 1)} coefficients, got {c.shape[0]}")
    exact = c.dtype == object
    out = np.zeros((dim(d, n),) + c.shape[1:], dtype=c.dtype)
    if exact:
        out[...] = Fraction(0)
    for dst, num in _elevation_index(d, n):
        out[dst] += _bcast(_weights(num, n, exact), c.ndim) * c
    if counter is not None:
        counter.elevate += (d + 1) * c.size
    return out


def elevate_transpose(v, d: int, n: int, counter: OpCounter | None = None) -> np.ndarray:
    """Apply the transpose of the degree ``n - 1 -> n`` elevation."""
    if n < 1:
        raise ValueError("elevation target degree must be >= 1")
    v = np.asarray(v)
    if v.shape[0] != dim(d, n):
        raise ValueError(f"expected {dim(d, n)} entries, got {v.shape[0]}")
    exact = v.dtype == object
    out = None
    for dst, num in _elevation_index(d, n):
        term = _bcast(_weights(num, n, exact), v.ndim) * v[dst]
        out = term if out is None else out + term
    if counter is not None:
        counter.elevate += (d + 1) * out.size
    return out


def elevate_to(c, d: int, n1: int, n2: int, counter: OpCounter | None = None) -> np.ndarray:
    """Successive elevation from degree *n1* to *n2* (identity if equal)."""
    if n2 < n1:
        raise ValueError(f"cannot elevate from degree {n1} down to {n2}")
    c = np.asarray(c)
    for n in range(n1 + 1, n2 + 1):
        c = elevate(c, d, n, counter)
    return c


def elevation_matrix(d: int, n: int, exact: bool = False) -> np.ndarray:
    """Dense ``dim(d, n) x dim(d, n - 1)`` matrix of one elevation step.

    Only meant for tests and small exact identities.
    """
    rows, cols = dim(d, n), dim(d, n - 1)
    E = np.zeros((rows, cols), dtype=object if exact else float)
    if exact:
        E[...] = Fraction(0)
    for dst, num in _elevation_index(d, n):
        E[dst, np.arange(cols)] = _weights(num, n, exact)
    return E


def eval_decasteljau(c, d: int, p) -> float:
    """Evaluate a B-form at barycentric point *p* by repeated degree reduction."""
    c = np.asarray(c, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != (d + 1,):
        raise ValueError(f"point must have {d + 1} barycentric coordinates")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("barycentric coordinates must sum to one")
    n = degree_of(d, c.shape[0])
    for k in range(n, 0, -1):
        nxt = np.zeros((dim(d, k - 1),) + c.shape[1:])
        for i, (dst, _) in enumerate(_elevation_index(d, k)):
            nxt += p[i] * c[dst]
        c = nxt
    return c[0]


@dataclass(frozen=True)
class GradientPattern:
    """Sparse gradient structure of the degree-n Bernstein basis.

    ``pairs[r]`` lists ``(rank of alpha - e_i at degree n - 1, i)`` for the
    degree-n index of rank r.  ``by_direction[i]`` holds the same data as
    two aligned arrays ``(alpha ranks, lower ranks)`` for vectorized use.
    """

    d: int
    n: int
    pairs: tuple[tuple[tuple[int, int], ...], ...]
    by_direction: tuple[tuple[np.ndarray, np.ndarray], ...]


@lru_cache(maxsize=None)
def gradient_pattern(d: int, n: int) -> GradientPattern:
    if n < 1:
        raise ValueError("gradient pattern needs degree >= 1")
    pairs = [[] for _ in range(dim(d, n))]
    by_dir = []
    lower = np.arange(dim(d, n - 1))
    for i, (dst, _) in enumerate(_elevation_index(d, n)):
        for lo, hi in zip(lower, dst):
            pairs[hi].append((int(lo), i))
        by_dir.append((dst, lower))
    for p in pairs:
        p.sort(key=lambda t: t[1])
    return GradientPattern(d, n, tuple(tuple(p) for p in pairs), tuple(by_dir))


def product_scale(alpha, beta) -> Fraction:
    """Scale s with ``B_alpha * B_beta = s * B_{alpha + beta}``."""
    total = tuple(a + b for a, b in zip(alpha, beta))
    return Fraction(binom_mi(total, alpha), comb(sum(alpha) + sum(beta), sum(alpha)))


@dataclass
class BForm:
    """A polynomial in B-form on the d-simplex."""

    d: int
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.shape[0] != dim(self.d, self.n):
            raise ValueError(
                f"B-form of degree {self.n} in d={self.d} needs "
                f"{dim(self.d, self.n)} coefficients, got {self.coeffs.shape[0]}")

    @classmethod
    def constant(cls, d: int, n: int, value: float = 1.0) -> "BForm":
        return cls(d, n, np.full(dim(d, n), value))

    def __call__(self, p) -> float:
        return eval_decasteljau(self.coeffs, self.d, p)

    def elevate(self, n2: int | None = None) -> "BForm":
        n2 = self.n + 1 if n2 is None else n2
        return BForm(self.d, n2, elevate_to(self.coeffs, self.d, self.n, n2))
