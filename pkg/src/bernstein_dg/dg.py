"""Discontinuous Galerkin solver for 2-D first-order linear acoustics.

    p_t + div u = 0,     u_t + grad p = 0,     q = (p, u1, u2), c = 1.

Each cell carries a degree-n B-form per field.  Coefficient arrays have
shape ``(dim(2, n), 3, n_cells)``.  The semi-discrete system is

    M u_t = (F(u_h), grad v)_T - <F^ . n, v>_gamma,

evaluated with Stroud sum factorization on cells and facets, and inverted
cellwise with one reference mass factorization scaled by 1 / (2 |T|).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .bernstein import gradient_pattern
from .counters import OpCounter
from .mass_solve import factor
from .mesh import INTERIOR, SimplexMesh
from .multiindex import dim, enumerate_indices, index_array
from .stroud import duffy, eval_at_stroud, facet_rule, moments_from_values, stroud_rule

__all__ = [
    "NFIELDS",
    "FIELDS",
    "AcousticState",
    "AcousticDG",
    "acoustic_flux",
    "rusanov_flux",
    "upwind_flux",
    "wall_ghost",
    "trace_indices",
    "ssprk3_step",
    "euler_step",
    "plane_wave",
    "standing_wave",
    "write_state_csv",
    "read_state_csv",
]

NFIELDS = 3
FIELDS = ("p", "u1", "u2")


def acoustic_flux(q: np.ndarray) -> np.ndarray:
    """Physical flux, field axis first: ``(3, ...) -> (3, 2, ...)``."""
    p, u1, u2 = q
    z = np.zeros_like(p)
    return np.stack([np.stack([u1, u2]), np.stack([p, z]), np.stack([z, p])])


def _normal_flux(q, normal):
    p, u1, u2 = q
    un = u1 * normal[0] + u2 * normal[1]
    return np.stack([un, p * normal[0], p * normal[1]])


def rusanov_flux(qm: np.ndarray, qp: np.ndarray, normal) -> np.ndarray:
    """Local Lax-Friedrichs flux F^ . n with wave speed 1.

    *qm*, *qp* have the field axis first; *normal* is ``(2, ...)`` and
    broadcasts against the remaining axes.
    """
    normal = np.asarray(normal, dtype=float)
    return 0.5 * (_normal_flux(qm, normal) + _normal_flux(qp, normal)) - 0.5 * (qp - qm)


def upwind_flux(qm: np.ndarray, qp: np.ndarray, normal) -> np.ndarray:
    """Exact Riemann solution of the acoustic system normal to the facet."""
    normal = np.asarray(normal, dtype=float)
    unm = qm[1] * normal[0] + qm[2] * normal[1]
    unp = qp[1] * normal[0] + qp[2] * normal[1]
    pstar = 0.5 * (qm[0] + qp[0]) + 0.5 * (unm - unp)
    ustar = 0.5 * (unm + unp) + 0.5 * (qm[0] - qp[0])
    return np.stack([ustar, pstar * normal[0], pstar * normal[1]])


def wall_ghost(qm: np.ndarray, normal) -> np.ndarray:
    """Reflecting wall: same pressure, mirrored normal velocity."""
    un = qm[1] * normal[0] + qm[2] * normal[1]
    return np.stack([qm[0], qm[1] - 2 * un * normal[0], qm[2] - 2 * un * normal[1]])


FLUXES = {"rusanov": rusanov_flux, "upwind": upwind_flux}
GHOSTS = {"wall": wall_ghost}


def trace_indices(n: int) -> np.ndarray:
    """``(3, n + 1)`` ranks of the coefficients with ``alpha_v = 0``.

    Row v lists them in the facet's own 1-D order: by the entry of the
    lower remaining local vertex, ascending.
    """
    lookup = {a: r for r, a in enumerate(enumerate_indices(2, n))}
    out = np.empty((3, n + 1), dtype=np.int64)
    for v in range(3):
        i, j = [k for k in range(3) if k != v]
        for k in range(n + 1):
            a = [0, 0, 0]
            a[i], a[j] = k, n - k
            out[v, k] = lookup[tuple(a)]
    return out


def euler_step(u, dt: float, L: Callable):
    return u + dt * L(u)


def ssprk3_step(u, dt: float, L: Callable):
    """Three-stage, third-order strong-stability-preserving Runge-Kutta."""
    u1 = u + dt * L(u)
    u2 = 0.75 * u + 0.25 * u1 + 0.25 * dt * L(u1)
    return u / 3.0 + (2.0 / 3.0) * u2 + (2.0 / 3.0) * dt * L(u2)


def plane_wave(k=(1, 0)) -> Callable:
    """Exact solution ``p = sin(2 pi (k.x - |k| t))``, ``u = p k / |k|``."""
    kx, ky = map(float, k)
    kn = np.hypot(kx, ky)

    def exact(x, y, t):
        p = np.sin(2 * np.pi * (kx * x + ky * y - kn * t))
        return np.stack([p, p * kx / kn, p * ky / kn])

    return exact


def standing_wave() -> Callable:
    """Exact solution compatible with reflecting walls on the unit square."""

    def exact(x, y, t):
        p = np.cos(2 * np.pi * x) * np.cos(2 * np.pi * t)
        u1 = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * t)
        return np.stack([p, u1, np.zeros_like(p + y)])

    return exact


@dataclass
class AcousticState:
    """B-form coefficients of (p, u1, u2) on every cell."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[:2] != (dim(2, self.n), NFIELDS):
            raise ValueError(
                f"coefficients must have shape ({dim(2, self.n)}, {NFIELDS}, n_cells), "
                f"got {self.coeffs.shape}")


class AcousticDG:
    """Semi-discrete DG operator for linear acoustics on a triangulation.

    Parameters
    ----------
    mesh : SimplexMesh
    n : int
        Polynomial degree on every cell.
    flux : {"rusanov", "upwind"}
    solver : {"block", "dense"}
        Reference mass solver: block LDL^T or dense Cholesky.
    q : int, optional
        Stroud points per direction; defaults to ``n + 1``.
    """

    def __init__(self, mesh: SimplexMesh, n: int, flux: str = "rusanov",
                 solver: str = "block", q: int | None = None,
                 physical_flux: Callable = acoustic_flux):
        if flux not in FLUXES:
            raise ValueError(f"unknown flux {flux!r}")
        if solver not in ("block", "dense"):
            raise ValueError(f"unknown mass solver {solver!r}")
        unknown = {t for t in mesh.facet_tags if t != INTERIOR} - set(GHOSTS)
        if unknown:
            raise ValueError(f"unknown boundary tag(s) {sorted(unknown)}")
        self.mesh = mesh
        self.n = n
        self.size = dim(2, n)
        self.flux_name = flux
        self.numerical_flux = FLUXES[flux]
        self.physical_flux = physical_flux
        self.rule = stroud_rule(2, n + 1 if q is None else q)
        self.frule = facet_rule(2, n + 1 if q is None else q)
        self.mass = factor(2, n, None if solver == "block" else 2)
        self.trace = trace_indices(n)

        g = mesh.geometry
        self.jac = 2.0 * g.volume  # |T| d!
        fc, fl = mesh.facet_cells, mesh.facet_local
        self.normals = mesh.facet_normals().T.copy()
        self.lengths = mesh.facet_lengths()
        self.interior = mesh.interior
        self._bnd = {t: np.array([k for k, s in enumerate(mesh.facet_tags) if s == t])
                     for t in set(mesh.facet_tags) - {INTERIOR}}
        self._minus_idx = self.trace[fl[:, 0]]
        inner = np.flatnonzero(self.interior)
        self._inner = inner
        self._plus_idx = self.trace[fl[inner, 1]]
        self._flip = mesh.facet_flip[inner]

    # -- state helpers ----------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros((self.size, NFIELDS, self.mesh.n_cells))

    def physical_points(self, rule) -> np.ndarray:
        """Coordinates of the rule's points on every cell, ``(q, q, nc, 2)``."""
        lam = rule.points
        return np.einsum("abi,cix->abcx", lam, self.mesh.geometry.coords)

    def project(self, func: Callable, t: float = 0.0, q: int | None = None) -> np.ndarray:
        """L2 projection of ``func(x, y, t) -> (3, ...)`` onto the DG space."""
        rule = stroud_rule(2, self.n + 2 if q is None else q)
        x = self.physical_points(rule)
        vals = np.asarray(func(x[..., 0], x[..., 1], t), dtype=float)
        vals = np.moveaxis(vals, 0, 2)  # (q, q, 3, nc)
        qq = rule.q
        mom = moments_from_values(vals.reshape(qq, qq, -1), 2, self.n, rule)
        # the |T| d! factors of moments and mass cancel
        return self.mass.solve(mom).reshape(self.size, NFIELDS, -1)

    def l2_error(self, coeffs, exact: Callable | None = None, t: float = 0.0,
                 q: int | None = None) -> np.ndarray:
        """Per-field L2 norms of ``u_h - exact`` (or of u_h if exact is None)."""
        rule = stroud_rule(2, self.n + 4 if q is None else q)
        qq = rule.q
        vals = eval_at_stroud(coeffs.reshape(self.size, -1), 2, self.n, rule)
        vals = vals.reshape(qq, qq, NFIELDS, -1)
        if exact is not None:
            x = self.physical_points(rule)
            vals = vals - np.moveaxis(np.asarray(exact(x[..., 0], x[..., 1], t)), 0, 2)
        w = rule.weights[:, :, None, None]
        per_cell = (w * vals ** 2).sum(axis=(0, 1)) * self.jac[None, :]
        return np.sqrt(per_cell.sum(axis=1))

    def energy(self, coeffs) -> float:
        """``u^T M u`` summed over fields and cells."""
        Mu = self.apply_mass(coeffs)
        return float(np.sum(coeffs * Mu))

    def apply_mass(self, coeffs) -> np.ndarray:
        from .mass import apply_fast

        out = apply_fast(coeffs.reshape(self.size, -1), 2, self.n)
        return out.reshape(coeffs.shape) * self.jac

    def integrals(self, coeffs) -> np.ndarray:
        """Domain integral of each field, shape (3,)."""
        from math import factorial

        mean = factorial(self.n) / factorial(self.n + 2)
        return np.einsum("pfc,c->f", coeffs, self.jac) * mean

    # -- residual terms ---------------------------------------------------

    def volume_term(self, coeffs, counter: OpCounter | None = None) -> np.ndarray:
        """``(F(u_h), grad v)_T`` for every basis function v."""
        n, nc = self.n, self.mesh.n_cells
        out = self.zeros()
        if n == 0:
            return out
        qq = self.rule.q
        vals = eval_at_stroud(coeffs.reshape(self.size, -1), 2, n, self.rule, counter)
        vals = np.moveaxis(vals.reshape(qq, qq, NFIELDS, nc), 2, 0)
        F = self.physical_flux(vals)  # (3, 2, q, q, nc)
        if counter is not None:
            counter.pointwise += F.size
        F = np.moveaxis(F, (0, 1), (2, 3)).reshape(qq, qq, -1)
        mom = moments_from_values(F, 2, n - 1, self.rule, counter)
        mom = mom.reshape(-1, NFIELDS, 2, nc)
        grad = self.mesh.geometry.grad_b
        for i, (hi, lo) in enumerate(gradient_pattern(2, n).by_direction):
            G = mom[:, :, 0, :] * grad[:, i, 0] + mom[:, :, 1, :] * grad[:, i, 1]
            out[hi] += n * G[lo]
        return out * self.jac

    def _traces(self, coeffs, idx, cells, counter):
        tr = coeffs[idx, :, cells[:, None]]  # (nf, n+1, 3)
        nf = len(cells)
        tr = np.moveaxis(tr, 1, 0).reshape(self.n + 1, -1)
        vals = eval_at_stroud(tr, 1, self.n, self.frule, counter)
        return np.moveaxis(vals.reshape(self.frule.q, nf, NFIELDS), 2, 0)  # (3, qf, nf)

    def facet_term(self, coeffs, counter: OpCounter | None = None) -> np.ndarray:
        """``<F^ . n, v>`` on every facet, scattered into both neighbours.

        The ``-`` cell receives the moments with sign +1, the ``+`` cell
        with sign -1 (its outward normal is reversed).
        """
        mesh = self.mesh
        fc = mesh.facet_cells
        qm = self._traces(coeffs, self._minus_idx, fc[:, 0], counter)
        qp = np.empty_like(qm)
        inner = self._inner
        vals_p = self._traces(coeffs, self._plus_idx, fc[inner, 1], counter)
        vals_p[:, :, self._flip] = vals_p[:, ::-1, self._flip]
        qp[:, :, inner] = vals_p
        for tag, faces in self._bnd.items():
            qp[:, :, faces] = GHOSTS[tag](qm[:, :, faces], self.normals[:, None, faces])
        fl = self.numerical_flux(qm, qp, self.normals[:, None, :])  # (3, qf, nf)
        if counter is not None:
            counter.pointwise += fl.size
        fl = np.moveaxis(fl, 0, 1).reshape(self.frule.q, -1)
        mom = moments_from_values(fl, 1, self.n, self.frule, counter)
        mom = mom.reshape(self.n + 1, NFIELDS, -1) * self.lengths
        mom = np.moveaxis(mom, 2, 0)  # (nf, n+1, 3)

        out = self.zeros()
        np.add.at(out, (self._minus_idx, slice(None), fc[:, 0, None]), mom)
        mp = mom[inner]
        mp[self._flip] = mp[self._flip, ::-1]
        np.add.at(out, (self._plus_idx, slice(None), fc[inner, 1, None]), -mp)
        return out

    def residual(self, coeffs, counter: OpCounter | None = None) -> np.ndarray:
        """Volume minus facet terms, before mass inversion."""
        return self.volume_term(coeffs, counter) - self.facet_term(coeffs, counter)

    def rhs(self, coeffs, counter: OpCounter | None = None) -> np.ndarray:
        """L(u) = M^{-1} (volume - facet), per cell and field."""
        r = self.residual(coeffs, counter)
        x = self.mass.solve(r.reshape(self.size, -1), counter)
        return x.reshape(r.shape) / self.jac

    # -- time stepping ----------------------------------------------------

    def stable_dt(self, cfl: float = 0.5) -> float:
        return cfl * self.mesh.h_min() / (2 * self.n + 1)

    def step_euler(self, coeffs, dt: float) -> np.ndarray:
        return euler_step(coeffs, dt, self.rhs)

    def step_ssprk3(self, coeffs, dt: float) -> np.ndarray:
        return ssprk3_step(coeffs, dt, self.rhs)

    def run(self, coeffs, t_final: float, cfl: float = 0.5, max_growth: float = 10.0):
        """Advance with SSP-RK3 to *t_final*; returns (coeffs, steps).

        Raises FloatingPointError if the energy grows by more than
        *max_growth* over its initial value.
        """
        if t_final <= 0:
            return coeffs, 0
        steps = int(np.ceil(t_final / self.stable_dt(cfl)))
        dt = t_final / steps
        e0 = self.energy(coeffs)
        for k in range(steps):
            coeffs = self.step_ssprk3(coeffs, dt)
            if (k + 1) % 20 == 0 or k + 1 == steps:
                e = self.energy(coeffs)
                if not np.isfinite(e) or (e0 > 0 and e > max_growth * e0):
                    raise FloatingPointError(
                        f"energy grew from {e0:.3e} to {e:.3e} after {k + 1} steps; "
                        f"reduce the CFL number (dt={dt:.3e})")
        return coeffs, steps


def write_state_csv(state: AcousticState, path) -> None:
    """Columns: cell, field, rank, a0, a1, a2, value."""
    alphas = index_array(2, state.n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "field", "rank", "a0", "a1", "a2", "value"])
        P, nf, nc = state.coeffs.shape
        for c in range(nc):
            for f in range(nf):
                for r in range(P):
                    w.writerow([c, FIELDS[f], r, *alphas[r].tolist(),
                                f"{state.coeffs[r, f, c]:.17g}"])


def read_state_csv(path) -> AcousticState:
    rows = list(csv.DictReader(open(path, newline="")))
    n = sum(int(rows[0][k]) for k in ("a0", "a1", "a2"))
    nc = 1 + max(int(r["cell"]) for r in rows)
    coeffs = np.zeros((dim(2, n), NFIELDS, nc))
    for r in rows:
        coeffs[int(r["rank"]), FIELDS.index(r["field"]), int(r["cell"])] = float(r["value"])
    return AcousticState(n, coeffs)
