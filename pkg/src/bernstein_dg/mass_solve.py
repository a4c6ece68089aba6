"""Fast inversion of the Bernstein mass matrix.

Two independent routes are provided:

* :func:`block_gauss_solve` performs block Gaussian elimination directly on
  the right-hand side, doing the scalar elimination on the (n+1) x (n+1)
  table of block scalars N and replacing every off-diagonal block product by
  (transposed) degree elevations.
* :func:`factor` builds a reusable block LDL^T factorization
  ``M^{d,n} = L Delta L^T`` where L is unit lower block triangular with
  blocks ``l_ij (E^{d-1, n-i, n-j})^T`` and Delta is block diagonal with
  blocks ``d_ii M^{d-1, n-i}``.  :func:`solve` applies its inverse in
  O(n^{d+1}) operations.

Blocks of Delta are solved either by a dense Cholesky factorization or, if
their dimension is above ``base_dim``, by another block factorization.

Vectors are in the canonical multiindex order, where the block with leading
entry ``a`` is the contiguous slice ``block_offsets(d, n)[a:a+2]``.  Any
trailing axes are treated as a batch of right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from .bernstein import elevate, elevate_transpose
from .counters import OpCounter
from .mass import StructureError, dense, nu_table
from .multiindex import block_offsets, dim

__all__ = [
    "NuFactorization",
    "DenseSolver",
    "BlockLDLt",
    "factor_nu",
    "factor",
    "solve",
    "block_gauss_solve",
    "elevation_op_count",
    "base_solve_op_count",
]


@dataclass(frozen=True)
class NuFactorization:
    """``N = L diag(D) L^T`` for the block-scalar table of M^{d,n}.

    The factorization is carried out in exact rational arithmetic and
    rounded once; ``L_exact`` and ``D_exact`` keep the rationals.
    """

    d: int
    n: int
    N: np.ndarray
    L: np.ndarray
    D: np.ndarray
    L_exact: np.ndarray
    D_exact: tuple[Fraction, ...]


@lru_cache(maxsize=None)
def factor_nu(d: int, n: int) -> NuFactorization:
    N = nu_table(d, n, n)
    size = n + 1
    L = np.empty((size, size), dtype=object)
    L[...] = Fraction(0)
    D = [Fraction(0)] * size
    for j in range(size):
        L[j, j] = Fraction(1)
        D[j] = N[j, j] - sum(L[j, k] ** 2 * D[k] for k in range(j))
        if D[j] <= 0:
            raise StructureError(f"nonpositive pivot {D[j]} at {j} factoring N^({d},{n})")
        for i in range(j + 1, size):
            L[i, j] = (N[i, j] - sum(L[i, k] * L[j, k] * D[k] for k in range(j))) / D[j]
    Lf = L.astype(float)
    Df = np.array([float(x) for x in D])
    Lf.flags.writeable = False
    Df.flags.writeable = False
    return NuFactorization(d, n, N, Lf, Df, L, tuple(D))


class DenseSolver:
    """Cholesky factorization of the full reference matrix M^{d,n}."""

    def __init__(self, d: int, n: int):
        self.d = d
        self.n = n
        self.size = dim(d, n)
        self._cho = scipy.linalg.cho_factor(dense(d, n), lower=True)

    def solve(self, y, counter: OpCounter | None = None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if counter is not None:
            m = self.size
            counter.base_solve += m * (m + 1) * (y.size // m)
        flat = y.reshape(self.size, -1)
        return scipy.linalg.cho_solve(self._cho, flat).reshape(y.shape)

    def __repr__(self):
        return f"DenseSolver(d={self.d}, n={self.n})"


class BlockLDLt:
    """Block LDL^T factorization of M^{d,n}; immutable after construction."""

    def __init__(self, d: int, n: int, nu_fac: NuFactorization, blocks):
        if d < 1:
            raise ValueError("block factorization needs d >= 1")
        self.d = d
        self.n = n
        self.size = dim(d, n)
        self.nu = nu_fac
        self.blocks = tuple(blocks)
        self.offsets = tuple(block_offsets(d, n))

    def __repr__(self):
        return f"BlockLDLt(d={self.d}, n={self.n}, blocks={self.blocks[0]!r}...)"

    def _split(self, x):
        o = self.offsets
        return [x[o[a]:o[a + 1]] for a in range(self.n + 1)]

    def lower_solve(self, y, counter: OpCounter | None = None) -> np.ndarray:
        """Apply L^{-1} by forward block substitution."""
        n, dl, L = self.n, self.d - 1, self.nu.L
        x = np.array(y, dtype=float)
        xb = self._split(x)
        for a in range(n):
            z = xb[a]
            for b in range(a + 1, n + 1):
                if b == n:
                    # transposed elevation preserves coefficient sums, so the
                    # projection onto the constant block is a plain sum
                    s = z.sum(axis=0)
                    xb[n] -= L[n, a] * s
                    if counter is not None:
                        counter.axpy += z.size + s.size
                    continue
                z = elevate_transpose(z, dl, n - b + 1)
                xb[b] -= L[b, a] * z
                if counter is not None:
                    counter.elev_forward += (dl + 1) * z.size
                    counter.axpy += z.size
        return x

    def lower_apply(self, x) -> np.ndarray:
        """Apply L itself."""
        n, dl, L = self.n, self.d - 1, self.nu.L
        x = np.asarray(x, dtype=float)
        out = x.copy()
        ob, xb = self._split(out), self._split(x)
        for a in range(n):
            z = xb[a]
            for b in range(a + 1, n + 1):
                z = elevate_transpose(z, dl, n - b + 1)
                ob[b] += L[b, a] * z
        return out

    def lower_t_solve(self, y, counter: OpCounter | None = None) -> np.ndarray:
        """Apply L^{-T} by backward block substitution."""
        n, dl, L = self.n, self.d - 1, self.nu.L
        x = np.array(y, dtype=float)
        xb = self._split(x)
        for a in range(n, 0, -1):
            z = xb[a]
            for b in range(a - 1, -1, -1):
                if a == n:
                    # elevating a constant leaves every coefficient equal
                    xb[b] -= L[n, b] * z[0]
                    if counter is not None:
                        counter.axpy += xb[b].size
                    continue
                if counter is not None:
                    counter.elev_backward += (dl + 1) * z.size
                z = elevate(z, dl, n - b)
                xb[b] -= L[a, b] * z
                if counter is not None:
                    counter.axpy += z.size
        return x

    def lower_t_apply(self, x) -> np.ndarray:
        """Apply L^T."""
        n, dl, L = self.n, self.d - 1, self.nu.L
        x = np.asarray(x, dtype=float)
        out = x.copy()
        ob, xb = self._split(out), self._split(x)
        for a in range(n, 0, -1):
            z = xb[a]
            for b in range(a - 1, -1, -1):
                z = elevate(z, dl, n - b)
                ob[b] += L[a, b] * z
        return out

    def delta_solve(self, y, counter: OpCounter | None = None) -> np.ndarray:
        x = np.array(y, dtype=float)
        xb = self._split(x)
        for a in range(self.n + 1):
            xb[a][...] = self.blocks[a].solve(xb[a], counter) / self.nu.D[a]
            if counter is not None:
                counter.scaling += xb[a].size
        return x

    def delta_apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        ob, xb = self._split(out), self._split(x)
        for a in range(self.n + 1):
            ob[a][...] = self.nu.D[a] * (dense(self.d - 1, self.n - a) @ xb[a])
        return out

    def solve(self, y, counter: OpCounter | None = None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.size:
            raise ValueError(f"expected {self.size} entries, got {y.shape[0]}")
        x = self.lower_solve(y, counter)
        x = self.delta_solve(x, counter)
        return self.lower_t_solve(x, counter)


@lru_cache(maxsize=None)
def factor(d: int, n: int, base_dim: int | None = None):
    """Mass solver for M^{d,n}.

    Blocks of dimension ``<= base_dim`` are factored densely; the default
    ``base_dim = d - 1`` gives one level of block factorization over dense
    (d-1)-dimensional Cholesky factors.  ``base_dim = 0`` recurses all the
    way down; ``base_dim >= d`` returns a dense Cholesky of the whole matrix.
    """
    if base_dim is None:
        base_dim = d - 1
    if base_dim < 0:
        raise ValueError("base_dim must be >= 0")
    if d <= base_dim:
        return DenseSolver(d, n)
    blocks = [factor(d - 1, n - i, base_dim) for i in range(n + 1)]
    return BlockLDLt(d, n, factor_nu(d, n), blocks)


def solve(fac, y, counter: OpCounter | None = None) -> np.ndarray:
    """``x = M^{-1} y`` using a factorization from :func:`factor`."""
    return fac.solve(y, counter)


@lru_cache(maxsize=None)
def _dense_lower(d, n):
    return DenseSolver(d, n)


def block_gauss_solve(d: int, n: int, y, counter: OpCounter | None = None) -> np.ndarray:
    """Solve ``M^{d,n} x = y`` by block Gaussian elimination.

    The elimination on the scalar table is done in exact arithmetic as the
    sweep proceeds; blocks of dimension d-1 are solved with dense Cholesky.
    """
    if d < 1:
        raise ValueError("block elimination needs d >= 1")
    N = nu_table(d, n, n).copy()
    x = np.array(y, dtype=float)
    if x.shape[0] != dim(d, n):
        raise ValueError(f"expected {dim(d, n)} entries, got {x.shape[0]}")
    o = block_offsets(d, n)
    xb = [x[o[a]:o[a + 1]] for a in range(n + 1)]
    dl = d - 1

    # forward elimination
    for a in range(n + 1):
        z = xb[a]
        for b in range(a + 1, n + 1):
            z = elevate_transpose(z, dl, n - b + 1, counter)
            mult = N[b, a] / N[a, a]
            xb[b] -= float(mult) * z
            for c in range(a, n + 1):
                N[b, c] -= mult * N[a, c]

    # lower-dimensional inversion, then normalize each row of N
    for a in range(n + 1):
        piv = N[a, a]
        xb[a][...] = _dense_lower(dl, n - a).solve(xb[a], counter) / float(piv)
        for c in range(a, n + 1):
            N[a, c] /= piv

    # backward elimination
    for a in range(n, -1, -1):
        z = xb[a]
        for b in range(a - 1, -1, -1):
            z = elevate(z, dl, n - b, counter)
            xb[b] -= float(N[b, a]) * z
    return x


def elevation_op_count(n: int) -> int:
    """Multiply-adds of the L^{-1} elevation sweep at d = 2: n(n^2+3n-4)/3."""
    return n * (n * n + 3 * n - 4) // 3


def base_solve_op_count(n: int) -> int:
    """Dense 1-D triangular-solve cost of the Delta phase at d = 2."""
    return (n + 1) * (n + 2) * (n + 3) // 3
