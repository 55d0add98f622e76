"""P1 velocity and P1 / P0 pressure dof maps on the active mesh."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cutgeom import CutDecomposition
from .mesh import BackgroundMesh, MeshTopologyError


class ElementPair(str, Enum):
    P1P1 = "p1p1"
    P1P0 = "p1p0"

    @classmethod
    def parse(cls, value) -> "ElementPair":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True, eq=False)
class DofMap:
    pair: ElementPair
    active_cells: np.ndarray
    active_vertices: np.ndarray  # background vertex ids, increasing
    n_velocity_dofs: int
    n_pressure_dofs: int
    cell_to_velocity_dofs: np.ndarray  # (n_active, 12): vertex-major, xyz interleaved
    cell_to_pressure_dofs: np.ndarray  # (n_active, 4) for P1, (n_active, 1) for P0
    vertex_to_dof: np.ndarray  # background vertex -> active vertex number or -1
    cell_to_active: np.ndarray  # background cell -> active cell number or -1

    @property
    def n_dofs(self) -> int:
        return self.n_velocity_dofs + self.n_pressure_dofs

    @property
    def pressure_offset(self) -> int:
        return self.n_velocity_dofs

    @property
    def pressure_kernel_vector(self) -> np.ndarray:
        k = np.zeros(self.n_dofs)
        k[self.n_velocity_dofs :] = 1.0
        return k

    def velocity_dof(self, vertex_ids, component) -> np.ndarray:
        return 3 * self.vertex_to_dof[vertex_ids] + component

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(velocity as (n_active_vertices, 3), pressure coefficients)."""
        return x[: self.n_velocity_dofs].reshape(-1, 3), x[self.n_velocity_dofs :]

    def interpolate(self, mesh: BackgroundMesh, u=None, p=None) -> np.ndarray:
        """Nodal (P1) / centroid (P0) interpolation of vectorised callables."""
        x = np.zeros(self.n_dofs)
        if u is not None:
            x[: self.n_velocity_dofs] = np.asarray(u(mesh.vertices[self.active_vertices])).ravel()
        if p is not None:
            if self.pair is ElementPair.P1P1:
                pts = mesh.vertices[self.active_vertices]
            else:
                pts = mesh.cell_coords[self.active_cells].mean(axis=1)
            x[self.n_velocity_dofs :] = np.asarray(p(pts)).ravel()
        return x


def build_dofmap(mesh: BackgroundMesh, decomposition: CutDecomposition, pair) -> DofMap:
    pair = ElementPair.parse(pair)
    active = decomposition.active_cells
    cells = mesh.cells[active]
    av = np.unique(cells)
    v2d = np.full(mesh.n_vertices, -1, dtype=np.int64)
    v2d[av] = np.arange(len(av))
    c2a = np.full(mesh.n_cells, -1, dtype=np.int64)
    c2a[active] = np.arange(len(active))

    local = v2d[cells]  # (na, 4)
    vel = (3 * local[:, :, None] + np.arange(3)).reshape(len(active), 12)
    nvel = 3 * len(av)
    if pair is ElementPair.P1P1:
        pres = nvel + local
        npres = len(av)
    else:
        pres = nvel + np.arange(len(active))[:, None]
        npres = len(active)
    return DofMap(
        pair=pair,
        active_cells=active,
        active_vertices=av,
        n_velocity_dofs=nvel,
        n_pressure_dofs=npres,
        cell_to_velocity_dofs=vel,
        cell_to_pressure_dofs=pres,
        vertex_to_dof=v2d,
        cell_to_active=c2a,
    )


def eval_basis(mesh: BackgroundMesh, cell: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Values (n, 4) and constant gradients (4, 3) of the barycentric basis."""
    if abs(mesh.cell_volume[cell]) <= 1e-14 * mesh.cell_diameter[cell] ** 3:
        raise MeshTopologyError(f"degenerate cell {cell}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam = mesh.barycentric(np.full(len(pts), cell), pts)
    return lam, mesh.barycentric_gradients[cell].copy()
