"""Assembly of the stabilized Nitsche fictitious-domain Stokes system.

Bilinear form (velocity u, v; pressure p, q)::

    a_h(u, v) + b_h(u, q) + b_h(v, p) - c_h(p, q) + i_h(u, v) - j_h(p, q)

with Nitsche boundary terms on Gamma, the pressure stabilization c_h, and
the ghost penalties i_h (velocity) and j_h (pressure) on the boundary-zone
facets.  For P1/P0 the pressure jump terms of c_h on the cut skeleton and of
j_h on the parts of zone facets outside Omega add up to one full-facet
integral over every interior facet of the active mesh, which is how they are
assembled here.

All P1 gradients are cell-wise constant, so every facet term reduces to the
facet area times a product of constant jumps.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .cutgeom import CellKind, CutDecomposition
from .mesh import NONE, BackgroundMesh
from .spaces import DofMap, ElementPair

log = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StabilizationParams:
    beta0: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    gamma: float = 10.0

    def __post_init__(self):
        for name in ("beta0", "beta1", "beta2", "beta3", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def defaults(cls, pair) -> "StabilizationParams":
        """Parameters of the convergence study for each element pair."""
        if ElementPair.parse(pair) is ElementPair.P1P1:
            return cls(beta1=0.2, beta2=1.0, beta3=0.05, gamma=10.0)
        return cls(beta0=0.25, beta2=0.1, gamma=10.0)

    def replace(self, **changes) -> "StabilizationParams":
        return dataclasses.replace(self, **changes)

    def require_solvable(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive for a solve (Nitsche coercivity)")


def _zero_field(x):
    return np.zeros((len(x), 3))


@dataclass(frozen=True)
class ProblemData:
    body_force: VectorField = _zero_field
    boundary_velocity: VectorField = _zero_field
    exact_velocity: Optional[VectorField] = None
    exact_velocity_gradient: Optional[Callable] = None  # (n, 3, 3), [., comp, deriv]
    exact_pressure: Optional[Callable] = None

    def boundary_flux(self, decomposition: CutDecomposition) -> float:
        g = self.boundary_velocity(decomposition.surf_points)
        return float(np.sum(decomposition.surf_weights * np.einsum("ij,ij->i", g, decomposition.surf_normals)))

    def check_compatibility(self, decomposition: CutDecomposition) -> None:
        flux = self.boundary_flux(decomposition)
        area = decomposition.surf_weights.sum()
        if abs(flux) > 1e-10 * max(area, 1.0):
            raise ValueError(f"boundary data violates zero net flux: {flux:.3e}")


@dataclass(frozen=True, eq=False)
class StokesSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    kernel: np.ndarray
    dofmap: DofMap
    pressure_mass: np.ndarray  # integral over Omega of each pressure basis function
    params: StabilizationParams

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def write_coo(self, path: str | Path) -> None:
        """One ``row col value`` triplet per line, row-major order."""
        A = self.matrix.tocoo()
        order = np.lexsort((A.col, A.row))
        with open(path, "w") as fh:
            fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def normal_derivative_jump(normal, grad_plus, grad_minus) -> np.ndarray:
    """[d_n w] = n . (grad w|T+ - grad w|T-), broadcast over leading axes."""
    n = np.asarray(normal, dtype=float)
    return np.tensordot(np.asarray(grad_plus) - np.asarray(grad_minus), n, axes=([-1], [0]))


def jump_eval(mesh: BackgroundMesh, facet: int, grad_plus, grad_minus, normal=None, degree: int = 2):
    """Normal-derivative jump at the quadrature points of an interior facet.

    ``grad_plus`` / ``grad_minus`` are constant 3-vectors or callables of the
    (n, 3) facet points.  Returns (points, jump values).
    """
    from .quadrature import map_triangles

    if mesh.facet_cells[facet, 1] == NONE:
        raise ValueError(f"facet {facet} is exterior; jumps need two cells")
    n = mesh.facet_normal[facet] if normal is None else np.asarray(normal, dtype=float)
    pts, _ = map_triangles(mesh.vertices[mesh.facets[facet]][None], degree)

    def at(g):
        return g(pts) if callable(g) else np.broadcast_to(np.asarray(g, dtype=float), pts.shape)

    return pts, normal_derivative_jump(n, at(grad_plus), at(grad_minus))


def _segments(cells: np.ndarray):
    """Unique (sorted) cell ids and reduceat start offsets."""
    if len(cells) == 0:
        return cells, np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    return cells[starts], starts


def _reduce(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    if len(starts) == 0:
        return np.zeros((0,) + values.shape[1:])
    return np.add.reduceat(values, starts, axis=0)


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(vals.ravel())

    def add_block(self, rdofs, cdofs, block):
        """rdofs (m, a), cdofs (m, b), block (m, a, b)."""
        self.add(rdofs[:, :, None], cdofs[:, None, :], block)

    def matrix(self, n: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((n, n))
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        A = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


def _vector_block(scalar: np.ndarray, vdofs: np.ndarray):
    """Expand scalar (m, 4, 4) blocks onto xyz-interleaved velocity dofs."""
    m = len(scalar)
    blk = np.zeros((m, 4, 3, 4, 3))
    for c in range(3):
        blk[:, :, c, :, c] = scalar
    return vdofs, vdofs, blk.reshape(m, 12, 12)


def assemble(
    mesh: BackgroundMesh,
    decomposition: CutDecomposition,
    dofmap: DofMap,
    params: StabilizationParams,
    data: ProblemData | None = None,
) -> StokesSystem:
    data = data or ProblemData()
    pair = dofmap.pair
    if not np.any(decomposition.classification == CellKind.INSIDE):
        log.warning("no uncut cell in the active mesh; the system may be ill-conditioned")
    if decomposition.g3_max_steps < 0:
        log.warning("cut cells without a path to an uncut cell (G3 check failed)")
    if data.boundary_velocity is not _zero_field and len(decomposition.surf_weights):
        try:
            data.check_compatibility(decomposition)
        except ValueError as exc:
            log.warning("%s", exc)

    n = dofmap.n_dofs
    c2a = dofmap.cell_to_active
    G_all = mesh.barycentric_gradients
    h_all = mesh.cell_diameter
    gamma = params.gamma
    trip = _Triplets()
    rhs = np.zeros(n)

    # ---- volume moments on T cap Omega
    vc = decomposition.vol_cells
    vcells, vstarts = _segments(vc)
    va = c2a[vcells]
    lam = mesh.barycentric(vc, decomposition.vol_points)
    w = decomposition.vol_weights
    f = np.asarray(data.body_force(decomposition.vol_points), dtype=float)
    vol = _reduce(w, vstarts)
    m1 = _reduce(w[:, None] * lam, vstarts)  # (k, 4)
    f_lam = _reduce((w[:, None, None] * f[:, :, None] * lam[:, None, :]).reshape(len(w), 12), vstarts)
    f_lam = f_lam.reshape(-1, 3, 4)
    f_sum = _reduce(w[:, None] * f, vstarts)

    G = G_all[vcells]
    hT = h_all[vcells]
    vdofs = dofmap.cell_to_velocity_dofs[va]
    pdofs = dofmap.cell_to_pressure_dofs[va]

    K = vol[:, None, None] * np.einsum("cik,cjk->cij", G, G)
    trip.add_block(*_vector_block(K, vdofs))

    # -(div v, p) over T cap Omega; rows velocity (j, comp), cols pressure
    if pair is ElementPair.P1P1:
        Bvol = -np.einsum("cjd,ck->cjdk", G, m1).reshape(-1, 12, 4)
    else:
        Bvol = -(G * vol[:, None, None]).reshape(-1, 12, 1)
    trip.add_block(vdofs, pdofs, Bvol)
    trip.add_block(pdofs, vdofs, Bvol.transpose(0, 2, 1))

    if pair is ElementPair.P1P1 and params.beta1 > 0:
        C = params.beta1 * (hT**2 * vol)[:, None, None] * np.einsum("cik,cjk->cij", G, G)
        trip.add_block(pdofs, pdofs, -C)

    # load: (f, v) and -beta1 h^2 (f, grad q)
    np.add.at(rhs, vdofs, f_lam.transpose(0, 2, 1).reshape(-1, 12))
    if pair is ElementPair.P1P1 and params.beta1 > 0:
        phi = params.beta1 * hT[:, None] ** 2 * np.einsum("ckd,cd->ck", G, f_sum)
        np.add.at(rhs, pdofs, -phi)

    if pair is ElementPair.P1P1:
        pressure_mass = np.bincount((pdofs - dofmap.pressure_offset).ravel(), m1.ravel(), dofmap.n_pressure_dofs)
    else:
        pressure_mass = np.bincount((pdofs - dofmap.pressure_offset).ravel(), vol, dofmap.n_pressure_dofs)

    # ---- Nitsche terms on Gamma cap T
    sc = decomposition.surf_cells
    if len(sc):
        scells, sstarts = _segments(sc)
        sa = c2a[scells]
        if np.any(sa < 0):
            raise ValueError("surface quadrature on an inactive cell")
        slam = mesh.barycentric(sc, decomposition.surf_points)
        sw = decomposition.surf_weights
        sn = decomposition.surf_normals
        g = np.asarray(data.boundary_velocity(decomposition.surf_points), dtype=float)
        q = len(sw)
        S2 = _reduce((sw[:, None, None] * slam[:, :, None] * slam[:, None, :]).reshape(q, 16), sstarts).reshape(-1, 4, 4)
        S1n = _reduce((sw[:, None, None] * slam[:, :, None] * sn[:, None, :]).reshape(q, 12), sstarts).reshape(-1, 4, 3)
        Gs = G_all[scells]
        hs = h_all[scells]
        vd = dofmap.cell_to_velocity_dofs[sa]
        pd = dofmap.cell_to_pressure_dofs[sa]

        T1 = np.einsum("cik,cjk->cij", Gs, S1n)  # (d_n phi_i, phi_j)
        N = -T1 - T1.transpose(0, 2, 1) + (gamma / hs)[:, None, None] * S2
        trip.add_block(*_vector_block(N, vd))

        if pair is ElementPair.P1P1:
            S2n = _reduce(
                (sw[:, None, None, None] * slam[:, :, None, None] * slam[:, None, :, None] * sn[:, None, None, :]).reshape(q, 48),
                sstarts,
            ).reshape(-1, 4, 4, 3)
            Bs = S2n.transpose(0, 1, 3, 2).reshape(-1, 12, 4)  # (n_d phi_j, psi_k)
        else:
            Bs = S1n.reshape(-1, 12, 1)
        trip.add_block(vd, pd, Bs)
        trip.add_block(pd, vd, Bs.transpose(0, 2, 1))

        # load: (g, gamma/h v - d_n v + q n)
        g_lam = _reduce((sw[:, None, None] * g[:, :, None] * slam[:, None, :]).reshape(q, 12), sstarts).reshape(-1, 3, 4)
        g_n = _reduce((sw[:, None, None] * g[:, :, None] * sn[:, None, :]).reshape(q, 9), sstarts).reshape(-1, 3, 3)
        vel_load = (gamma / hs)[:, None, None] * g_lam - np.einsum("cjd,ced->cej", Gs, g_n)
        np.add.at(rhs, vd, vel_load.transpose(0, 2, 1).reshape(-1, 12))
        gdotn = np.einsum("ij,ij->i", g, sn) * sw
        if pair is ElementPair.P1P1:
            np.add.at(rhs, pd, _reduce(gdotn[:, None] * slam, sstarts))
        else:
            np.add.at(rhs, pd, _reduce(gdotn, sstarts)[:, None])

    # ---- facet terms
    fc = mesh.facet_cells
    nF = mesh.facet_normal
    area = mesh.facet_area
    hF = mesh.facet_diameter

    zone = decomposition.boundary_zone_facets
    if len(zone) and (params.beta2 > 0 or (pair is ElementPair.P1P1 and params.beta3 > 0)):
        a_plus, a_minus = c2a[fc[zone, 0]], c2a[fc[zone, 1]]
        d = np.concatenate(
            [
                np.einsum("fid,fd->fi", G_all[fc[zone, 0]], nF[zone]),
                -np.einsum("fid,fd->fi", G_all[fc[zone, 1]], nF[zone]),
            ],
            axis=1,
        )  # (nz, 8): jump of d_n phi for the 4+4 local functions
        dd = np.einsum("fi,fj->fij", d, d) * area[zone, None, None]
        if params.beta2 > 0:
            vdz = np.concatenate(
                [dofmap.cell_to_velocity_dofs[a_plus].reshape(-1, 4, 3), dofmap.cell_to_velocity_dofs[a_minus].reshape(-1, 4, 3)],
                axis=1,
            )
            I = params.beta2 * hF[zone, None, None] * dd
            for c in range(3):
                trip.add_block(vdz[:, :, c], vdz[:, :, c], I)
        if pair is ElementPair.P1P1 and params.beta3 > 0:
            pdz = np.concatenate([dofmap.cell_to_pressure_dofs[a_plus], dofmap.cell_to_pressure_dofs[a_minus]], axis=1)
            J = params.beta3 * hF[zone, None, None] ** 3 * dd
            trip.add_block(pdz, pdz, -J)

    if pair is ElementPair.P1P0 and params.beta0 > 0:
        fi = decomposition.active_interior_facets
        p_plus = dofmap.cell_to_pressure_dofs[c2a[fc[fi, 0]], 0]
        p_minus = dofmap.cell_to_pressure_dofs[c2a[fc[fi, 1]], 0]
        s = params.beta0 * hF[fi] * area[fi]
        pdz = np.stack([p_plus, p_minus], axis=1)
        blk = s[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
        trip.add_block(pdz, pdz, -blk)

    A = trip.matrix(n)
    return StokesSystem(
        matrix=A,
        rhs=rhs,
        kernel=dofmap.pressure_kernel_vector,
        dofmap=dofmap,
        pressure_mass=pressure_mass,
        params=params,
    )
