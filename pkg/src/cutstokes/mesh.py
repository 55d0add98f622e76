"""Structured tetrahedral background meshes of axis-aligned boxes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

NONE = -1


class MeshTopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("Box corners must be 3-vectors")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float) -> "Box":
        return cls((lo, lo, lo), (hi, hi, hi))

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    vertices: np.ndarray  # (nv, 3)
    cells: np.ndarray  # (nc, 4), positively oriented
    facets: np.ndarray  # (nf, 3), sorted vertex indices
    facet_cells: np.ndarray  # (nf, 2), (lower cell, higher cell or NONE)
    cell_diameter: np.ndarray
    facet_diameter: np.ndarray
    cell_facets: np.ndarray = field(repr=False)  # (nc, 4), facet opposite local vertex i

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h_max(self) -> float:
        return float(self.cell_diameter.max())

    @cached_property
    def cell_coords(self) -> np.ndarray:
        return self.vertices[self.cells]

    @cached_property
    def cell_volume(self) -> np.ndarray:
        c = self.cell_coords
        return np.linalg.det(c[:, 1:] - c[:, :1]) / 6.0

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(nc, 4, 3): constant gradients of the four P1 shape functions."""
        c = self.cell_coords
        jac = (c[:, 1:] - c[:, :1]).transpose(0, 2, 1)  # columns are edge vectors
        inv = np.linalg.inv(jac)  # rows are grad lambda_1..3
        g0 = -inv.sum(axis=1, keepdims=True)
        return np.concatenate([g0, inv], axis=1)

    @cached_property
    def facet_area(self) -> np.ndarray:
        p = self.vertices[self.facets]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @cached_property
    def facet_normal(self) -> np.ndarray:
        """Unit normals oriented into T+ (the lower-index cell), so v+ = lim v(x + t n)."""
        p = self.vertices[self.facets]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        ctr = self.cell_coords[self.facet_cells[:, 0]].mean(axis=1)
        flip = np.einsum("ij,ij->i", n, ctr - p[:, 0]) < 0
        n[flip] *= -1
        return n

    @property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] != NONE)

    @property
    def exterior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] == NONE)

    def barycentric(self, cell_ids: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of ``points[i]`` in ``cells[cell_ids[i]]``."""
        g = self.barycentric_gradients[cell_ids]
        v0 = self.cell_coords[cell_ids, 0]
        lam = np.einsum("nij,nj->ni", g, points - v0)
        lam[:, 0] += 1.0
        return lam

    def write_text(self, path: str | Path) -> None:
        """Plain text dump: vertex count, vertices, cell count, cells."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices}\n")
            np.savetxt(fh, self.vertices, fmt="%.17g")
            fh.write(f"{self.n_cells}\n")
            np.savetxt(fh, self.cells, fmt="%d")


def _kuhn_pattern() -> np.ndarray:
    """Six tets of the unit cube, all sharing the lo->hi main diagonal.

    Local corner index is i + 2j + 4k.  Tet sigma walks 000 -> e_s0 -> e_s0+e_s1 -> 111.
    """
    tets = []
    for perm in permutations(range(3)):
        pt = np.zeros(3, dtype=int)
        idx = [0]
        for axis in perm:
            pt[axis] = 1
            idx.append(int(pt[0] + 2 * pt[1] + 4 * pt[2]))
        tets.append(idx)
    return np.array(tets)


def build_structured_tet_mesh(box: Box, divisions: Sequence[int]) -> BackgroundMesh:
    nx, ny, nz = (int(d) for d in divisions)
    if min(nx, ny, nz) < 1:
        raise ValueError(f"divisions must be >= 1, got {divisions}")
    lo, hi = np.array(box.lo), np.array(box.hi)

    axes = [lo[a] + (hi[a] - lo[a]) * np.arange(n + 1) / n for a, n in enumerate((nx, ny, nz))]
    for a in range(3):
        axes[a][-1] = hi[a]  # exact box faces
    # x fastest
    Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    corners = np.stack(
        [vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)], axis=1
    )
    pattern = _kuhn_pattern()
    cells = corners[:, pattern].reshape(-1, 4)

    # canonical orientation: positive signed volume
    c = vertices[cells]
    det = np.linalg.det(c[:, 1:] - c[:, :1])
    neg = det < 0
    cells[neg] = cells[neg][:, [0, 1, 3, 2]]

    return _finish_mesh(vertices, cells)


def build_facet_topology(cells: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique facets, their (T+, T-) cells, and the per-cell facet table.

    The facet opposite local vertex ``i`` of a cell is stored in column ``i``
    of the returned cell-facet table.  T+ is the lower cell index.
    """
    cells = np.asarray(cells, dtype=np.int64)
    nc = len(cells)
    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    faces = np.sort(cells[:, local].reshape(-1, 3), axis=1)
    facets, inverse, counts = np.unique(faces, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = facets[counts > 2][0]
        raise MeshTopologyError(f"non-manifold facet {tuple(bad)} shared by >2 cells")

    owner = np.repeat(np.arange(nc), 4)
    order = np.lexsort((owner, inverse))
    facet_cells = np.full((len(facets), 2), NONE, dtype=np.int64)
    sorted_inv, sorted_owner = inverse[order], owner[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_inv[1:] != sorted_inv[:-1]
    facet_cells[sorted_inv[first], 0] = sorted_owner[first]
    facet_cells[sorted_inv[~first], 1] = sorted_owner[~first]
    return facets, facet_cells, inverse.reshape(nc, 4)


def _finish_mesh(vertices: np.ndarray, cells: np.ndarray) -> BackgroundMesh:
    facets, facet_cells, cell_facets = build_facet_topology(cells)
    c = vertices[cells]
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    lengths = np.stack([np.linalg.norm(c[:, a] - c[:, b], axis=1) for a, b in edges], axis=1)
    diam = lengths.max(axis=1)
    fd = diam[facet_cells[:, 0]].copy()
    inner = facet_cells[:, 1] != NONE
    fd[inner] = 0.5 * (fd[inner] + diam[facet_cells[inner, 1]])
    return BackgroundMesh(
        vertices=vertices,
        cells=cells,
        facets=facets,
        facet_cells=facet_cells,
        cell_diameter=diam,
        facet_diameter=fd,
        cell_facets=cell_facets,
    )


def mesh_from_arrays(vertices, cells) -> BackgroundMesh:
    """Wrap arbitrary tetrahedra (used by tests on single cells)."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.array(cells, dtype=np.int64).reshape(-1, 4)
    c = vertices[cells]
    det = np.linalg.det(c[:, 1:] - c[:, :1])
    if np.any(np.abs(det) == 0):
        raise MeshTopologyError("degenerate cell")
    neg = det < 0
    cells[neg] = cells[neg][:, [0, 1, 3, 2]]
    return _finish_mesh(vertices, cells)
