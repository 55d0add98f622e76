"""Simplex quadrature rules and the point/weight container used by cut cells.

Reference simplices are the unit triangle {(0,0),(1,0),(0,1)} and the unit
tetrahedron {(0,0,0),(1,0,0),(0,1,0),(0,0,1)}.  All rules have positive
weights.  Points are returned in barycentric form (rows sum to one) so they
can be mapped onto any physical simplex with a single matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, sqrt
from typing import Optional

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    normal: Optional[np.ndarray] = None

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn) -> np.ndarray:
        """Integrate a vectorised ``fn(points) -> (n, ...)`` array."""
        vals = np.asarray(fn(self.points))
        return np.tensordot(self.weights, vals, axes=(0, 0))


def _orbit(coords: list[tuple]) -> np.ndarray:
    """All distinct permutations of each barycentric tuple, deterministic order."""
    from itertools import permutations

    out: list[tuple] = []
    for c in coords:
        seen = []
        for p in permutations(c):
            if p not in seen:
                seen.append(p)
        out.extend(seen)
    return np.array(out, dtype=float)


def _conical_triangle(n: int) -> tuple[np.ndarray, np.ndarray]:
    # collapsed Gauss-Jacobi product rule, exact to degree 2n-1
    xa, wa = roots_jacobi(n, 1.0, 0.0)
    xb, wb = roots_jacobi(n, 0.0, 0.0)
    a, b = (xa + 1) / 2, (xb + 1) / 2
    wa, wb = wa / 4, wb / 2
    A, B = np.meshgrid(a, b, indexing="ij")
    x = A.ravel()
    y = (B * (1 - A)).ravel()
    w = np.outer(wa, wb).ravel()
    bary = np.column_stack([1 - x - y, x, y])
    return bary, w


def _conical_tet(n: int) -> tuple[np.ndarray, np.ndarray]:
    xa, wa = roots_jacobi(n, 2.0, 0.0)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    xc, wc = roots_jacobi(n, 0.0, 0.0)
    a, b, c = (xa + 1) / 2, (xb + 1) / 2, (xc + 1) / 2
    wa, wb, wc = wa / 8, wb / 4, wc / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    x = A.ravel()
    y = (B * (1 - A)).ravel()
    z = (C * (1 - A) * (1 - B)).ravel()
    w = np.einsum("i,j,k->ijk", wa, wb, wc).ravel()
    bary = np.column_stack([1 - x - y - z, x, y, z])
    return bary, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 3) and weights summing to 1/2."""
    if degree <= 1:
        bary, w = np.full((1, 3), 1.0 / 3.0), np.array([1.0])
    elif degree == 2:
        bary = _orbit([(2 / 3, 1 / 6, 1 / 6)])
        w = np.full(3, 1.0 / 3.0)
    elif degree <= 5:
        r = sqrt(15.0)
        a1, a2 = (6 - r) / 21, (6 + r) / 21
        bary = np.vstack(
            [
                np.full((1, 3), 1.0 / 3.0),
                _orbit([(a1, a1, 1 - 2 * a1)]),
                _orbit([(a2, a2, 1 - 2 * a2)]),
            ]
        )
        w = np.concatenate([[9 / 40], np.full(3, (155 - r) / 1200), np.full(3, (155 + r) / 1200)])
    else:
        bary, w = _conical_triangle(ceil((degree + 1) / 2))
        return bary, w
    return bary, w / 2.0


@lru_cache(maxsize=None)
def tet_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 4) and weights summing to 1/6."""
    if degree <= 1:
        bary, w = np.full((1, 4), 0.25), np.array([1.0])
    elif degree == 2:
        a = (5 - sqrt(5)) / 20
        bary = _orbit([(1 - 3 * a, a, a, a)])
        w = np.full(4, 0.25)
    elif degree <= 5:
        # 14-point degree-5 rule (Walkington)
        a1 = 0.0927352503108912264
        a2 = 0.3108859192633006098
        b = 0.0455037041256496495
        bary = np.vstack(
            [
                _orbit([(1 - 3 * a1, a1, a1, a1)]),
                _orbit([(1 - 3 * a2, a2, a2, a2)]),
                _orbit([(b, b, 0.5 - b, 0.5 - b)]),
            ]
        )
        w = np.concatenate(
            [
                np.full(4, 0.0734930431163619495),
                np.full(4, 0.1126879257180158508),
                np.full(6, 0.0425460207770814664),
            ]
        )
    else:
        bary, w = _conical_tet(ceil((degree + 1) / 2))
        return bary, w
    return bary, w / 6.0


def map_tets(corners: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Map the reference rule onto a batch of tetrahedra.

    corners: (m, 4, 3).  Returns points (m*q, 3) grouped by tetrahedron and
    weights (m*q,) scaled by the absolute volume of each tetrahedron.
    """
    bary, w = tet_rule(degree)
    pts = np.einsum("qi,mij->mqj", bary, corners)
    e = corners[:, 1:] - corners[:, :1]
    vol6 = np.abs(np.linalg.det(e))
    wts = (vol6[:, None] * w[None, :])
    return pts.reshape(-1, 3), wts.ravel()


def map_triangles(corners: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Same as :func:`map_tets` for a batch (m, 3, 3) of triangles in 3D."""
    bary, w = triangle_rule(degree)
    pts = np.einsum("qi,mij->mqj", bary, corners)
    e1, e2 = corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]
    cr = e1[:, [1, 2, 0]] * e2[:, [2, 0, 1]] - e1[:, [2, 0, 1]] * e2[:, [1, 2, 0]]
    area2 = np.linalg.norm(cr, axis=1)
    wts = area2[:, None] * w[None, :]
    return pts.reshape(-1, 3), wts.ravel()
