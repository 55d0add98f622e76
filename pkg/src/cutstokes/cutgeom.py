"""Cell classification against a polytope and cut-cell quadrature.

Quadrature data is kept as flat point clouds sorted by background cell
index, which is what the vectorised assembly consumes.  Per-cell
:class:`QuadratureRule` views are available for inspection and tests.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .mesh import NONE, BackgroundMesh
from .polytope import _TET_FACES, PolytopeDomain, clip_tetrahedron
from .quadrature import QuadratureRule, map_tets, map_triangles

log = logging.getLogger(__name__)

EPS_GEOM = 1e-12


class CellKind(IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    CUT = 2


@dataclass(frozen=True, eq=False)
class CutDecomposition:
    classification: np.ndarray
    active_cells: np.ndarray
    boundary_zone_cells: np.ndarray
    boundary_zone_facets: np.ndarray
    active_interior_facets: np.ndarray
    # volume point cloud, grouped by cell
    vol_points: np.ndarray
    vol_weights: np.ndarray
    vol_cells: np.ndarray
    # surface point cloud, grouped by cell then polygon
    surf_points: np.ndarray
    surf_weights: np.ndarray
    surf_normals: np.ndarray
    surf_cells: np.ndarray
    surf_polygon: np.ndarray
    polygons: list  # (cell, half-space tag, (k, 3) vertex coords)
    g3_max_steps: int
    volume_degree: int
    surface_degree: int

    @property
    def n_active(self) -> int:
        return len(self.active_cells)

    def is_active(self) -> np.ndarray:
        return self.classification != CellKind.OUTSIDE

    def cut_volumes(self, n_cells: int) -> np.ndarray:
        return np.bincount(self.vol_cells, self.vol_weights, minlength=n_cells)

    def volume_rule(self, cell: int) -> QuadratureRule:
        sel = self.vol_cells == cell
        return QuadratureRule(self.vol_points[sel], self.vol_weights[sel])

    def surface_rules(self, cell: int) -> list[QuadratureRule]:
        out = []
        for pid in np.unique(self.surf_polygon[self.surf_cells == cell]):
            sel = self.surf_polygon == pid
            out.append(
                QuadratureRule(self.surf_points[sel], self.surf_weights[sel], self.surf_normals[sel][0])
            )
        return out

    def write_debug(self, path: str | Path) -> None:
        """One boundary polygon per block: ``cell tag k`` then k vertex lines."""
        with open(path, "w") as fh:
            for cell, tag, coords in self.polygons:
                fh.write(f"{cell} {tag} {len(coords)}\n")
                np.savetxt(fh, coords, fmt="%.17g")


def _fan_tets(poly) -> np.ndarray:
    c = poly.centroid
    out = []
    for i in range(len(poly.faces)):
        p = poly.face_coords(i)
        for j in range(1, len(p) - 1):
            out.append([c, p[0], p[j], p[j + 1]])
    return np.array(out)


def _fan_triangles(p: np.ndarray) -> np.ndarray:
    return np.array([[p[0], p[j], p[j + 1]] for j in range(1, len(p) - 1)])


class _SurfaceCollector:
    def __init__(self, degree: int):
        self.degree = degree
        self.chunks: list[tuple] = []
        self.polygons: list = []

    def add(self, cell: int, tag: int, coords: np.ndarray, normal: np.ndarray):
        tris = _fan_triangles(coords)
        pts, w = map_triangles(tris, self.degree)
        if w.sum() <= 0:
            return
        self.chunks.append((cell, pts, w, normal))
        self.polygons.append((cell, tag, coords))

    def arrays(self):
        if not self.chunks:
            z = np.zeros((0, 3))
            e = np.zeros(0, dtype=np.int64)
            return z, np.zeros(0), z, e, e, []
        order = sorted(range(len(self.chunks)), key=lambda i: self.chunks[i][0])
        pts, w, nrm, cells, pid = [], [], [], [], []
        for new_id, i in enumerate(order):
            cell, p, ww, n = self.chunks[i]
            pts.append(p)
            w.append(ww)
            nrm.append(np.broadcast_to(n, p.shape))
            cells.append(np.full(len(ww), cell, dtype=np.int64))
            pid.append(np.full(len(ww), new_id, dtype=np.int64))
        return (
            np.vstack(pts),
            np.concatenate(w),
            np.vstack(nrm),
            np.concatenate(cells),
            np.concatenate(pid),
            [self.polygons[i] for i in order],
        )


def classify_and_decompose(
    mesh: BackgroundMesh,
    domain: PolytopeDomain,
    volume_degree: int = 4,
    surface_degree: int = 4,
    eps_geom: float = EPS_GEOM,
) -> CutDecomposition:
    nc = mesh.n_cells
    vol_T = mesh.cell_volume
    dist = (mesh.vertices @ domain.normals.T - domain.offsets)[mesh.cells]  # (nc, 4, m)
    tol = 1e-12 * mesh.cell_diameter[:, None, None]

    outside = np.any(np.all(dist >= -tol, axis=1), axis=1)
    inside = np.all(dist <= tol, axis=(1, 2)) & ~outside
    candidates = np.flatnonzero(~outside & ~inside)

    kind = np.full(nc, CellKind.OUTSIDE, dtype=np.int8)
    kind[inside] = CellKind.INSIDE
    surf = _SurfaceCollector(surface_degree)

    # boundary faces of uncut cells lying on a domain plane
    on_plane = np.abs(dist) <= tol
    face_idx = np.array(_TET_FACES)
    hits = np.all(on_plane[:, face_idx], axis=2) & inside[:, None, None]  # (nc, 4, m)
    for cell, lf, tag in zip(*np.nonzero(hits)):
        coords = mesh.cell_coords[cell, face_idx[lf]]
        surf.add(int(cell), int(tag), coords, domain.normals[tag])

    cut_pts, cut_w, cut_cells = [], [], []
    for cell in candidates:
        relevant = np.flatnonzero(np.any(dist[cell] >= -tol[cell, 0], axis=0))
        poly = clip_tetrahedron(
            mesh.cell_coords[cell], domain, snap_tol=1e-12 * mesh.cell_diameter[cell], planes=relevant
        )
        if poly.is_empty:
            continue
        tets = _fan_tets(poly)
        pts, w = map_tets(tets, volume_degree)
        v = w.sum()
        if v <= eps_geom * vol_T[cell]:
            continue
        if vol_T[cell] - v <= eps_geom * vol_T[cell]:
            kind[cell] = CellKind.INSIDE
            inside[cell] = True
        else:
            kind[cell] = CellKind.CUT
            cut_pts.append(pts)
            cut_w.append(w)
            cut_cells.append(np.full(len(w), cell, dtype=np.int64))
        for fi, tag in enumerate(poly.tags):
            if tag >= 0:
                surf.add(int(cell), int(tag), poly.face_coords(fi), domain.normals[tag])

    return _finalize(mesh, kind, inside, cut_pts, cut_w, cut_cells, surf, volume_degree, surface_degree)


def boundary_fitted_decomposition(
    mesh: BackgroundMesh, volume_degree: int = 4, surface_degree: int = 4
) -> CutDecomposition:
    """Reference decomposition for Omega equal to the whole mesh.

    Every cell is uncut and the boundary rules live on the exterior facets,
    with outward normals taken from the facet geometry.
    """
    nc = mesh.n_cells
    kind = np.full(nc, CellKind.INSIDE, dtype=np.int8)
    inside = np.ones(nc, dtype=bool)
    surf = _SurfaceCollector(surface_degree)
    ext = np.zeros(len(mesh.facets), dtype=bool)
    ext[mesh.exterior_facets] = True
    for cell in range(nc):
        for lf, verts in enumerate(_TET_FACES):
            if not ext[mesh.cell_facets[cell, lf]]:
                continue
            coords = mesh.cell_coords[cell, list(verts)]
            n = np.cross(coords[1] - coords[0], coords[2] - coords[0])
            n = n / np.linalg.norm(n)
            if np.dot(n, coords[0] - mesh.cell_coords[cell, lf]) < 0:
                n = -n
            surf.add(cell, ORIGINAL_FITTED, coords, n)
    return _finalize(mesh, kind, inside, [], [], [], surf, volume_degree, surface_degree)


ORIGINAL_FITTED = -2


def _finalize(mesh, kind, inside, cut_pts, cut_w, cut_cells, surf, volume_degree, surface_degree):
    ins = np.flatnonzero(inside)
    p_in, w_in = map_tets(mesh.cell_coords[ins], volume_degree)
    nq = len(w_in) // max(len(ins), 1)
    c_in = np.repeat(ins, nq)
    pts = np.vstack([p_in] + cut_pts) if cut_pts else p_in
    wts = np.concatenate([w_in] + cut_w) if cut_w else w_in
    cells = np.concatenate([c_in] + cut_cells) if cut_cells else c_in
    order = np.argsort(cells, kind="stable")
    sp, sw, sn, sc, spid, polys = surf.arrays()

    active = np.flatnonzero(kind != CellKind.OUTSIDE)
    zone_cells = np.flatnonzero(kind == CellKind.CUT)
    fc = mesh.facet_cells
    is_act = kind != CellKind.OUTSIDE
    both = (fc[:, 1] != NONE) & is_act[fc[:, 0]] & is_act[np.where(fc[:, 1] == NONE, 0, fc[:, 1])]
    act_int = np.flatnonzero(both)
    is_cut = kind == CellKind.CUT
    zone_facets = act_int[is_cut[fc[act_int, 0]] | is_cut[fc[act_int, 1]]]

    steps = _g3_walk(mesh, kind, act_int)
    return CutDecomposition(
        classification=kind,
        active_cells=active,
        boundary_zone_cells=zone_cells,
        boundary_zone_facets=zone_facets,
        active_interior_facets=act_int,
        vol_points=pts[order],
        vol_weights=wts[order],
        vol_cells=cells[order],
        surf_points=sp,
        surf_weights=sw,
        surf_normals=sn,
        surf_cells=sc,
        surf_polygon=spid,
        polygons=polys,
        g3_max_steps=steps,
        volume_degree=volume_degree,
        surface_degree=surface_degree,
    )


def _g3_walk(mesh: BackgroundMesh, kind: np.ndarray, act_int: np.ndarray) -> int:
    """Max number of facet crossings from a cut cell to an uncut one (-1 if unreachable)."""
    cut = np.flatnonzero(kind == CellKind.CUT)
    if len(cut) == 0:
        return 0
    nbrs: dict[int, list[int]] = {}
    for a, b in mesh.facet_cells[act_int]:
        nbrs.setdefault(int(a), []).append(int(b))
        nbrs.setdefault(int(b), []).append(int(a))
    depth = np.full(mesh.n_cells, -1)
    queue = deque(int(c) for c in np.flatnonzero(kind == CellKind.INSIDE))
    for c in queue:
        depth[c] = 0
    while queue:
        c = queue.popleft()
        for n in nbrs.get(c, ()):
            if depth[n] < 0:
                depth[n] = depth[c] + 1
                queue.append(n)
    d = depth[cut]
    if np.any(d < 0):
        log.warning("G3 violated: %d cut cells cannot reach an uncut cell", int(np.sum(d < 0)))
        return -1
    return int(d.max())
