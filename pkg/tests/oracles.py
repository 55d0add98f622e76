"""Reference computations that share no code with the package.

Monomials are integrated exactly over simplices by pushing the affine map
through the polynomial algebra and using the closed form
int_{unit simplex} xi^a eta^b zeta^c = a! b! c! / (a+b+c+d)!.
Convex polyhedra are split with scipy's Delaunay triangulation.
"""

from math import factorial

import numpy as np
from scipy.signal import convolve
from scipy.spatial import Delaunay


def _linear(c0, coeffs, dim):
    p = np.zeros((2,) * dim)
    p[(0,) * dim] = c0
    for j, c in enumerate(coeffs):
        idx = [0] * dim
        idx[j] = 1
        p[tuple(idx)] = c
    return p


def _monomial_in_ref(v0, J, exps):
    """Coefficients (dense array) of prod_k x_k^{e_k} with x = v0 + J xi."""
    dim = J.shape[1]
    poly = np.ones((1,) * dim)
    for k, e in enumerate(exps):
        lin = _linear(v0[k], J[k], dim)
        for _ in range(e):
            poly = convolve(poly, lin)
    return poly


def _integrate_ref(poly):
    dim = poly.ndim
    total = 0.0
    for idx in zip(*np.nonzero(poly)):
        num = np.prod([factorial(i) for i in idx])
        total += poly[idx] * num / factorial(sum(idx) + dim)
    return total


def tet_monomial(tet, exps) -> float:
    tet = np.asarray(tet, dtype=float)
    J = (tet[1:] - tet[0]).T
    return abs(np.linalg.det(J)) * _integrate_ref(_monomial_in_ref(tet[0], J, exps))


def triangle_monomial(tri, exps) -> float:
    tri = np.asarray(tri, dtype=float)
    J = (tri[1:] - tri[0]).T  # 3x2
    jac = np.linalg.norm(np.cross(J[:, 0], J[:, 1]))
    return jac * _integrate_ref(_monomial_in_ref(tri[0], J, exps))


def convex_monomial(points, exps) -> float:
    """Exact monomial integral over the convex hull of a point set."""
    pts = np.unique(np.round(np.asarray(points, dtype=float), 14), axis=0)
    tri = Delaunay(pts)
    return sum(tet_monomial(pts[s], exps) for s in tri.simplices)


def polygon_monomial(points, exps) -> float:
    p = np.asarray(points, dtype=float)
    return sum(triangle_monomial([p[0], p[j], p[j + 1]], exps) for j in range(1, len(p) - 1))


def monomials(degree):
    return [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a) for c in range(degree + 1 - a - b)]


def monte_carlo_volume(indicator, lo, hi, n, rng, chunk=1_000_000):
    """(estimate, standard error) of the volume of {indicator} in a box."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    hits = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        x = lo + (hi - lo) * rng.random((m, 3))
        hits += int(np.count_nonzero(indicator(x)))
        done += m
    box = float(np.prod(hi - lo))
    p = hits / n
    return box * p, box * np.sqrt(p * (1 - p) / n)


def random_polytope(rng, n_planes=None, margin=0.05):
    """Random convex polytope strictly inside [margin, 1 - margin]^3.

    Returns (normals, offsets) for the extra planes plus the clipping box.
    """
    k = int(rng.integers(1, 7)) if n_planes is None else n_planes
    centre = rng.uniform(0.35, 0.65, 3)
    n = rng.normal(size=(k, 3))
    n /= np.linalg.norm(n, axis=1)[:, None]
    d = n @ centre + rng.uniform(0.08, 0.4, k)
    eye = np.eye(3)
    normals = np.vstack([n, -eye, eye])
    offsets = np.concatenate([d, -np.full(3, margin), np.full(3, 1 - margin)])
    return normals, offsets


def complement_pieces(normals, offsets):
    """Disjoint half-space lists whose union is the complement of the polytope.

    Piece i is {n_i.x > d_i} cap {n_j.x <= d_j, j < i}.
    """
    pieces = []
    for i in range(len(offsets)):
        N = np.vstack([-normals[i : i + 1], normals[:i]])
        D = np.concatenate([-offsets[i : i + 1], offsets[:i]])
        pieces.append((N, D))
    return pieces
