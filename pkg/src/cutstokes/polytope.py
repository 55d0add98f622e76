"""Convex polytope domains and exact clipping of tetrahedra by half-spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

ORIGINAL = -1  # face tag for faces inherited from the tetrahedron

_TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolytopeDomain:
    """Omega = {x : normals[i] . x <= offsets[i] for all i}."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        n = np.array(self.normals, dtype=float).reshape(-1, 3)
        d = np.array(self.offsets, dtype=float).ravel()
        if len(n) != len(d):
            raise DomainError("normals and offsets differ in length")
        if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-14):
            raise DomainError("half-space normals must have unit length")
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", d)
        self._check_bounded_nonempty()

    @classmethod
    def from_planes(cls, normals, offsets) -> "PolytopeDomain":
        n = np.array(normals, dtype=float).reshape(-1, 3)
        d = np.array(offsets, dtype=float).ravel()
        s = np.linalg.norm(n, axis=1)
        return cls(n / s[:, None], d / s)

    @classmethod
    def box(cls, lo, hi) -> "PolytopeDomain":
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        eye = np.eye(3)
        return cls(np.vstack([-eye, eye]), np.concatenate([-lo, hi]))

    @property
    def n_planes(self) -> int:
        return len(self.offsets)

    def _check_bounded_nonempty(self):
        m = self.n_planes
        # Chebyshev ball: max r s.t. n_i.x + r <= d_i
        A = np.hstack([self.normals, np.ones((m, 1))])
        res = linprog(
            c=[0, 0, 0, -1.0],
            A_ub=A,
            b_ub=self.offsets,
            bounds=[(None, None)] * 3 + [(0, None)],
            method="highs",
        )
        if res.status == 3:
            raise DomainError("polytope is unbounded")
        if res.status != 0 or res.x[3] <= 0:
            raise DomainError("polytope has empty interior")
        for k in range(3):
            for sign in (1.0, -1.0):
                c = np.zeros(3)
                c[k] = -sign
                r = linprog(c, A_ub=self.normals, b_ub=self.offsets, bounds=[(None, None)] * 3, method="highs")
                if r.status == 3:
                    raise DomainError("polytope is unbounded")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """(n, m) values n_i . x - d_i; non-positive inside."""
        return np.asarray(points) @ self.normals.T - self.offsets

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(self.signed_distance(points) <= 0, axis=-1)

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex enumeration over all plane triples."""
        pts = []
        for i, j, k in combinations(range(self.n_planes), 3):
            A = self.normals[[i, j, k]]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            x = np.linalg.solve(A, self.offsets[[i, j, k]])
            if np.all(self.signed_distance(x) <= 1e-10):
                pts.append(x)
        # merge duplicates (degenerate vertices) without rounding the survivors
        kept: list[np.ndarray] = []
        for x in pts:
            if not any(np.abs(x - y).max() <= 1e-12 for y in kept):
                kept.append(x)
        return np.array(kept)

    @cached_property
    def _hull(self) -> ConvexHull:
        return ConvexHull(self.vertices)

    @property
    def volume(self) -> float:
        return float(self._hull.volume)

    @property
    def surface_area(self) -> float:
        return float(self._hull.area)


@dataclass
class ClippedPolyhedron:
    vertices: np.ndarray
    faces: list = field(default_factory=list)  # lists of vertex indices
    tags: list = field(default_factory=list)  # ORIGINAL or half-space index

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def face_coords(self, i: int) -> np.ndarray:
        return self.vertices[self.faces[i]]

    def faces_with_tag(self, tag: int) -> list[int]:
        return [i for i, t in enumerate(self.tags) if t == tag]

    @property
    def centroid(self) -> np.ndarray:
        used = sorted({v for f in self.faces for v in f})
        return self.vertices[used].mean(axis=0)

    def volume(self) -> float:
        return polyhedron_volume(self)


def tetrahedron_polyhedron(tet: np.ndarray) -> ClippedPolyhedron:
    return ClippedPolyhedron(
        vertices=np.array(tet, dtype=float).copy(),
        faces=[list(f) for f in _TET_FACES],
        tags=[ORIGINAL] * 4,
    )


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has a large fixed overhead on tiny inputs
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _newell(p: np.ndarray) -> np.ndarray:
    """Area vector (area times unit normal) of a planar polygon."""
    return 0.5 * _cross(p, np.roll(p, -1, axis=0)).sum(axis=0)


def polygon_area(face: np.ndarray) -> float:
    return float(np.linalg.norm(_newell(np.asarray(face, dtype=float))))


def polyhedron_volume(poly: ClippedPolyhedron) -> float:
    """Divergence theorem: |P| = 1/3 sum_f (x_f . n_f) |f| with outward n_f."""
    if poly.is_empty:
        return 0.0
    c = poly.centroid
    vol = 0.0
    for i in range(len(poly.faces)):
        p = poly.face_coords(i) - c
        a = _newell(p)
        vol += abs(np.dot(p.mean(axis=0), a)) / 3.0
    return vol


def clip_polyhedron(
    poly: ClippedPolyhedron, normal: np.ndarray, offset: float, tag: int, snap_tol: float
) -> ClippedPolyhedron:
    """Intersect with {x : normal . x <= offset}; the new cap face gets ``tag``.

    Vertices within ``snap_tol`` of the plane are projected onto it first.
    """
    if poly.is_empty:
        return poly
    V = poly.vertices.copy()
    s = V @ normal - offset
    near = (np.abs(s) <= snap_tol) & (s != 0)
    V[near] -= s[near, None] * normal[None, :]
    s[np.abs(s) <= snap_tol] = 0.0

    if np.all(s <= 0):
        tags = list(poly.tags)
        for i, f in enumerate(poly.faces):
            if np.all(s[f] == 0):
                tags[i] = tag
        return ClippedPolyhedron(V, [list(f) for f in poly.faces], tags)
    if np.all(s >= 0):
        return ClippedPolyhedron(np.zeros((0, 3)), [], [])

    verts = list(V)
    sv = list(s)
    cut: dict[tuple[int, int], int] = {}

    def crossing(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in cut:
            i, j = key
            t = s[i] / (s[i] - s[j])
            verts.append(V[i] + t * (V[j] - V[i]))
            sv.append(0.0)
            cut[key] = len(verts) - 1
        return cut[key]

    faces, tags = [], []
    cap_found = False
    for f, t in zip(poly.faces, poly.tags):
        out = []
        k = len(f)
        for m in range(k):
            a, b = f[m], f[(m + 1) % k]
            if s[a] <= 0:
                out.append(a)
            if (s[a] < 0 < s[b]) or (s[b] < 0 < s[a]):
                out.append(crossing(a, b))
        if len(out) < 3:
            continue
        if all(sv[v] == 0 for v in out):
            t = tag
            cap_found = True
        faces.append(out)
        tags.append(t)

    verts_arr = np.array(verts)
    if not cap_found:
        on = sorted({v for f in faces for v in f if sv[v] == 0})
        if len(on) >= 3:
            faces.append(_order_on_plane(verts_arr, on, normal))
            tags.append(tag)

    # compact the vertex list
    used = sorted({v for f in faces for v in f})
    remap = {old: new for new, old in enumerate(used)}
    return ClippedPolyhedron(
        verts_arr[used], [[remap[v] for v in f] for f in faces], tags
    )


def _order_on_plane(V: np.ndarray, idx: list[int], normal: np.ndarray) -> list[int]:
    p = V[idx]
    c = p.mean(axis=0)
    u = _cross(normal, [1.0, 0.0, 0.0])
    if np.linalg.norm(u) < 0.5:
        u = _cross(normal, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    w = _cross(normal, u)
    ang = np.arctan2((p - c) @ w, (p - c) @ u)
    return [idx[i] for i in np.argsort(ang, kind="stable")]


def clip_tetrahedron(
    tet_vertices: np.ndarray,
    domain: PolytopeDomain,
    snap_tol: float | None = None,
    planes=None,
) -> ClippedPolyhedron:
    """T intersect Omega by successive half-space clipping.

    ``snap_tol`` defaults to 1e-12 times the tetrahedron diameter.  ``planes``
    restricts clipping to a subset of half-space indices.
    """
    tet = np.asarray(tet_vertices, dtype=float)
    if snap_tol is None:
        diam = max(np.linalg.norm(tet[a] - tet[b]) for a, b in combinations(range(4), 2))
        snap_tol = 1e-12 * diam
    poly = tetrahedron_polyhedron(tet)
    idx = range(domain.n_planes) if planes is None else planes
    for i in idx:
        poly = clip_polyhedron(poly, domain.normals[i], domain.offsets[i], i, snap_tol)
        if poly.is_empty:
            break
    return poly
