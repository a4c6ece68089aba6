"""Affine triangulations with facet connectivity.

Local facet ``v`` of a cell is the edge opposite local vertex ``v``; its
endpoints are the two remaining local vertices in ascending local order.
A facet is traversed from the first endpoint to the second on the ``-``
side; ``flip`` marks facets whose ``+`` side runs the other way.

Periodic meshes keep their real vertex coordinates and identify facets by
their midpoints modulo the box, so each cell's geometry stays affine.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SimplexMesh",
    "CellGeometry",
    "build_structured_mesh",
    "cell_geometry",
    "write_mesh_csv",
    "read_mesh_csv",
]

INTERIOR = "interior"


@dataclass(frozen=True)
class CellGeometry:
    """Per-cell affine data; ``grad_b[c, i]`` is the gradient of b_i on cell c."""

    volume: np.ndarray
    grad_b: np.ndarray
    coords: np.ndarray


@dataclass
class SimplexMesh:
    vertices: np.ndarray
    cells: np.ndarray
    period: tuple[float, float] | None = None
    boundary_tag: str = "wall"
    facet_cells: np.ndarray = field(init=False, repr=False)
    facet_local: np.ndarray = field(init=False, repr=False)
    facet_flip: np.ndarray = field(init=False, repr=False)
    facet_tags: list[str] = field(init=False, repr=False)
    geometry: CellGeometry = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.geometry = cell_geometry(self.vertices, self.cells)
        if np.any(self.geometry.volume <= 0):
            raise ValueError("degenerate cell in mesh")
        self._connect()

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_facets(self) -> int:
        return len(self.facet_cells)

    @property
    def interior(self) -> np.ndarray:
        return self.facet_cells[:, 1] >= 0

    def _key(self, pts):
        scale = 1e9
        k = np.round(np.asarray(pts) * scale).astype(np.int64)
        if self.period is not None:
            k = k % np.round(np.asarray(self.period) * scale).astype(np.int64)
        return tuple(k.tolist())

    def _endpoints(self, c, v):
        i, j = [k for k in range(3) if k != v]
        return self.geometry.coords[c, i], self.geometry.coords[c, j]

    def _connect(self):
        seen: dict = {}
        fc, fl, flip, tags = [], [], [], []
        for c in range(self.n_cells):
            for v in range(3):
                p0, p1 = self._endpoints(c, v)
                key = self._key(0.5 * (p0 + p1))
                if key in seen:
                    f = seen.pop(key)
                    fc[f][1] = c
                    fl[f][1] = v
                    q0, _ = self._endpoints(fc[f][0], fl[f][0])
                    flip[f] = self._key(p0) != self._key(q0)
                    tags[f] = INTERIOR
                else:
                    seen[key] = len(fc)
                    fc.append([c, -1])
                    fl.append([v, -1])
                    flip.append(False)
                    tags.append(self.boundary_tag)
        self.facet_cells = np.array(fc, dtype=np.int64)
        self.facet_local = np.array(fl, dtype=np.int64)
        self.facet_flip = np.array(flip, dtype=bool)
        self.facet_tags = tags

    def facet_normals(self) -> np.ndarray:
        """Outward unit normals from the ``-`` cell, shape (n_facets, 2)."""
        g = self.geometry.grad_b[self.facet_cells[:, 0], self.facet_local[:, 0]]
        return -g / np.linalg.norm(g, axis=1)[:, None]

    def facet_lengths(self) -> np.ndarray:
        c, v = self.facet_cells[:, 0], self.facet_local[:, 0]
        g = self.geometry.grad_b[c, v]
        # |facet| = 2|T| |grad b_v| for the edge opposite vertex v
        return 2.0 * self.geometry.volume[c] * np.linalg.norm(g, axis=1)

    def h_min(self) -> float:
        """Smallest inscribed-circle diameter, 4|T| / perimeter."""
        x = self.geometry.coords
        perim = np.linalg.norm(x[:, [1, 2, 0]] - x, axis=2).sum(axis=1)
        return float((4.0 * self.geometry.volume / perim).min())


def cell_geometry(vertices, cells) -> CellGeometry:
    x = np.asarray(vertices, dtype=float)[np.asarray(cells)]
    J = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)
    det = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    grad = np.empty((len(x), 3, 2))
    grad[:, 1:] = Jinv
    grad[:, 0] = -Jinv.sum(axis=1)
    return CellGeometry(0.5 * np.abs(det), grad, x)


def build_structured_mesh(m: int, periodic: bool = False) -> SimplexMesh:
    """Unit square split into m x m squares, each cut into two right triangles."""
    if m < 1:
        raise ValueError("need at least one cell per side")
    s = np.linspace(0.0, 1.0, m + 1)
    X, Y = np.meshgrid(s, s, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (m + 1) + j

    cells = []
    for i in range(m):
        for j in range(m):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return SimplexMesh(vertices, np.array(cells), period=(1.0, 1.0) if periodic else None)


def write_mesh_csv(mesh: SimplexMesh, directory) -> None:
    """Write ``vertices.csv`` (id,x,y) and ``cells.csv`` (id,v0,v1,v2)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "vertices.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for k, (x, y) in enumerate(mesh.vertices):
            w.writerow([k, f"{x:.17g}", f"{y:.17g}"])
    with open(d / "cells.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "v2"])
        for k, c in enumerate(mesh.cells):
            w.writerow([k, *map(int, c)])
    if mesh.period is not None:
        (d / "period.txt").write_text(f"{mesh.period[0]:.17g} {mesh.period[1]:.17g}\n")


def read_mesh_csv(directory) -> SimplexMesh:
    d = Path(directory)
    verts = np.loadtxt(d / "vertices.csv", delimiter=",", skiprows=1, ndmin=2)
    cells = np.loadtxt(d / "cells.csv", delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    period = None
    if (d / "period.txt").exists():
        px, py = map(float, (d / "period.txt").read_text().split())
        period = (px, py)
    order = np.argsort(verts[:, 0])
    return SimplexMesh(verts[order, 1:], cells[np.argsort(cells[:, 0]), 1:], period=period)
