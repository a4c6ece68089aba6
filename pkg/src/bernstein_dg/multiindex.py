"""Multiindex combinatorics on the d-simplex.

Multiindices are plain tuples ``(a0, a1, ..., ad)`` of nonnegative ints.
The canonical ordering sorts by ``a0`` ascending and breaks ties by
applying the same rule to the tail ``(a1, ..., ad)``.  In that order every
set of indices sharing ``a0 = a`` is one contiguous run of length
``dim(d - 1, n - a)``, which is what the block mass-matrix algorithms
slice on.

All counts are exact Python integers; there is no overflow to detect.
Float conversion happens in the callers.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb, factorial, prod

import numpy as np

__all__ = [
    "dim",
    "enumerate_indices",
    "index_array",
    "rank",
    "unrank",
    "multinomial",
    "binom_mi",
    "unit",
    "block_offsets",
]


def dim(d: int, n: int) -> int:
    """Number of multiindices of order *n* in *d* dimensions, C(n+d, n)."""
    if d < 0 or n < 0:
        raise ValueError(f"dim requires d >= 0 and n >= 0, got d={d}, n={n}")
    return comb(n + d, n)


@lru_cache(maxsize=None)
def _enumerate(d: int, n: int) -> tuple[tuple[int, ...], ...]:
    if d == 0:
        return ((n,),)
    out = []
    for a in range(n + 1):
        out.extend((a,) + tail for tail in _enumerate(d - 1, n - a))
    return tuple(out)


def enumerate_indices(d: int, n: int) -> list[tuple[int, ...]]:
    """All multiindices with ``d + 1`` entries and order *n*, canonical order."""
    dim(d, n)
    return list(_enumerate(d, n))


@lru_cache(maxsize=None)
def index_array(d: int, n: int) -> np.ndarray:
    """Canonical enumeration as a read-only ``(dim(d, n), d + 1)`` int array."""
    arr = np.array(_enumerate(d, n), dtype=np.int64).reshape(-1, d + 1)
    arr.flags.writeable = False
    return arr


def rank(alpha) -> int:
    """Position of *alpha* in the canonical enumeration of its order."""
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"negative multiindex entry in {alpha}")
    d = len(alpha) - 1
    n = sum(alpha)
    r = 0
    for k in range(d):
        # skip every run whose leading entry is smaller than alpha[k]
        for a in range(alpha[k]):
            r += dim(d - k - 1, n - a)
        n -= alpha[k]
    return r


def unrank(d: int, n: int, index: int) -> tuple[int, ...]:
    """Inverse of :func:`rank`."""
    size = dim(d, n)
    if not 0 <= index < size:
        raise IndexError(f"index {index} out of range for dim({d}, {n}) = {size}")
    out = []
    for k in range(d):
        a = 0
        while True:
            run = dim(d - k - 1, n - a)
            if index < run:
                break
            index -= run
            a += 1
        out.append(a)
        n -= a
    out.append(n)
    return tuple(out)


def multinomial(n: int, alpha) -> int:
    """n! / alpha! for ``|alpha| = n``."""
    if sum(alpha) != n:
        raise ValueError(f"|alpha| = {sum(alpha)} does not match n = {n}")
    return factorial(n) // prod(factorial(a) for a in alpha)


def binom_mi(alpha, beta) -> int:
    """Componentwise binomial product, requires ``alpha >= beta``."""
    if len(alpha) != len(beta):
        raise ValueError("multiindices of different length")
    if any(a < b for a, b in zip(alpha, beta)):
        raise ValueError(f"binom_mi requires alpha >= beta, got {alpha}, {beta}")
    return prod(comb(a, b) for a, b in zip(alpha, beta))


def unit(d: int, i: int) -> tuple[int, ...]:
    """The multiindex e_i with ``d + 1`` entries."""
    return tuple(1 if k == i else 0 for k in range(d + 1))


def block_offsets(d: int, n: int) -> list[int]:
    """Start offsets of the ``a0 = 0, 1, ..., n`` runs, plus the total size."""
    offs = [0]
    for a in range(n + 1):
        offs.append(offs[-1] + dim(d - 1, n - a))
    return offs
