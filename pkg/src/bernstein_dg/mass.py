"""The Bernstein mass matrix on the unit right simplex.

Entries are exact rationals

    M^{d,m,n}_{alpha,beta} = m! n! (alpha+beta)! / ((m+n+d)! alpha! beta!).

Freezing the leading index entries splits M^{d,m,n} into an
(m+1) x (n+1) array of blocks, each a scalar multiple ``nu[a0, b0]`` of a
(d-1)-dimensional mass matrix.  The scalar table uses the binomial
C(m+n+d-1, a0+b0); that choice is checked against the entry formula every
time a table is built.

Physical cells scale the reference matrix by ``|T| d!``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .counters import OpCounter
from .multiindex import dim, enumerate_indices, index_array
from .stroud import StroudRule, eval_at_stroud, moments_from_values, stroud_rule

__all__ = [
    "StructureError",
    "Spectrum",
    "CGResult",
    "entry",
    "dense",
    "dense_exact",
    "apply_fast",
    "nu",
    "nu_table",
    "eigenvalue",
    "spectrum",
    "condition",
    "cg_solve",
    "MAX_DENSE_DIM",
]

MAX_DENSE_DIM = 5000


class StructureError(RuntimeError):
    """A combinatorial identity the algorithms rely on failed to hold."""


def entry(d: int, m: int, n: int, alpha, beta) -> Fraction:
    if sum(alpha) != m or sum(beta) != n:
        raise ValueError(f"|alpha| must be {m} and |beta| must be {n}")
    num = factorial(m) * factorial(n)
    den = factorial(m + n + d)
    for a, b in zip(alpha, beta):
        num *= factorial(a + b)
        den *= factorial(a) * factorial(b)
    return Fraction(num, den)


def _check_size(d, m, n):
    if max(dim(d, m), dim(d, n)) > MAX_DENSE_DIM:
        raise ValueError(
            f"dense mass matrix of size {dim(d, m)}x{dim(d, n)} exceeds the "
            f"cap of {MAX_DENSE_DIM}")


def dense_exact(d: int, m: int, n: int | None = None) -> np.ndarray:
    """Exact object array of Fractions; rows by degree m, columns by degree n."""
    n = m if n is None else n
    _check_size(d, m, n)
    rows, cols = enumerate_indices(d, m), enumerate_indices(d, n)
    out = np.empty((len(rows), len(cols)), dtype=object)
    for i, a in enumerate(rows):
        for j, b in enumerate(cols):
            out[i, j] = entry(d, m, n, a, b)
    return out


@lru_cache(maxsize=64)
def _dense_cached(d, m, n):
    A = index_array(d, m)
    B = index_array(d, n)
    top = m + n
    binom = np.array([[comb(i, j) for j in range(top + 1)] for i in range(top + 1)],
                     dtype=float)
    prod = np.ones((len(A), len(B)))
    for k in range(d + 1):
        a = A[:, k][:, None]
        b = B[:, k][None, :]
        prod *= binom[a + b, a]
    scale = Fraction(factorial(m) * factorial(n), factorial(m + n + d))
    out = float(scale) * prod
    out.flags.writeable = False
    return out


def dense(d: int, m: int, n: int | None = None) -> np.ndarray:
    """Float mass matrix M^{d,m,n}.

    Uses M_ab = m! n! / (m+n+d)! * prod_k C(a_k + b_k, a_k), so every factor
    is an exact integer until the final product.
    """
    n = m if n is None else n
    _check_size(d, m, n)
    return _dense_cached(d, m, n).copy()


def apply_fast(c, d: int, n: int, q: int | None = None, rule: StroudRule | None = None,
               counter: OpCounter | None = None) -> np.ndarray:
    """Matrix-free ``M^{d,n} c`` by evaluation at Stroud points then moments.

    Exact (up to roundoff) for ``q >= n + 1``.  Trailing axes of *c* are a batch.
    """
    if rule is None:
        rule = stroud_rule(d, n + 1 if q is None else q)
    vals = eval_at_stroud(c, d, n, rule, counter)
    return moments_from_values(vals, d, n, rule, counter)


def nu(d: int, m: int, n: int, a: int, b: int) -> Fraction:
    """Scalar multiplying M^{d-1, m-a, n-b} in block (a, b) of M^{d,m,n}."""
    return Fraction(comb(m, a) * comb(n, b), comb(m + n + d - 1, a + b) * (m + n + d))


def nu_table(d: int, m: int, n: int | None = None) -> np.ndarray:
    """The (m+1) x (n+1) table of block scalars as an object array of Fractions.

    Each block is spot-checked against :func:`entry` in exact arithmetic.
    """
    n = m if n is None else n
    if d < 1:
        raise ValueError("block structure needs d >= 1")
    tab = np.empty((m + 1, n + 1), dtype=object)
    for a in range(m + 1):
        for b in range(n + 1):
            tab[a, b] = nu(d, m, n, a, b)
            # first entries of the block on both sides
            alpha = (a, m - a) + (0,) * (d - 1)
            beta = (b, n - b) + (0,) * (d - 1)
            lower = entry(d - 1, m - a, n - b, alpha[1:], beta[1:])
            if tab[a, b] * lower != entry(d, m, n, alpha, beta):
                raise StructureError(
                    f"block ({a}, {b}) of M^({d},{m},{n}) does not factor as nu * M^(d-1)")
    return tab


def eigenvalue(d: int, n: int, i: int) -> Fraction:
    """lambda_{i,n} = (n!)^2 / ((n+i+d)! (n-i)!), multiplicity C(d+i-1, d-1)."""
    if not 0 <= i <= n:
        raise ValueError(f"eigenvalue index must lie in 0..{n}")
    return Fraction(factorial(n) ** 2, factorial(n + i + d) * factorial(n - i))


@dataclass(frozen=True)
class Spectrum:
    d: int
    n: int
    eigenvalues: tuple[Fraction, ...]
    multiplicities: tuple[int, ...]

    def as_array(self) -> np.ndarray:
        """All eigenvalues with repetition, descending."""
        return np.repeat([float(x) for x in self.eigenvalues], self.multiplicities)


def spectrum(d: int, n: int) -> Spectrum:
    vals = tuple(eigenvalue(d, n, i) for i in range(n + 1))
    mult = tuple(comb(d + i - 1, d - 1) if d > 0 else int(i == 0) for i in range(n + 1))
    return Spectrum(d, n, vals, mult)


def condition(d: int, n: int) -> Fraction:
    """2-norm condition number (2n+d)! / ((n+d)! n!)."""
    return Fraction(factorial(2 * n + d), factorial(n + d) * factorial(n))


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg_solve(rhs, d: int, n: int, tol: float = 1e-12, max_iter: int | None = None,
             x0=None, counter: OpCounter | None = None) -> CGResult:
    """Unpreconditioned conjugate gradients on M^{d,n} x = rhs.

    Matrix-vector products go through :func:`apply_fast`.  Stops when
    ``||r|| / ||rhs|| <= tol`` or after *max_iter* iterations; in the latter
    case the last iterate is returned with ``converged=False``.
    """
    b = np.asarray(rhs, dtype=float)
    rule = stroud_rule(d, n + 1)
    if max_iter is None:
        max_iter = 10 * dim(d, n)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_fast(x, d, n, rule=rule, counter=counter) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0, True)
    p = r.copy()
    rr = r @ r
    it = 0
    while np.sqrt(rr) / bnorm > tol and it < max_iter:
        Ap = apply_fast(p, d, n, rule=rule, counter=counter)
        step = rr / (p @ Ap)
        x += step * p
        r -= step * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    res = np.sqrt(rr) / bnorm
    return CGResult(x, it, float(res), bool(res <= tol))
