"""Error norms, diagnostic norms, condition numbers and rate fitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .cutgeom import CutDecomposition
from .forms import ProblemData, StokesSystem
from .mesh import BackgroundMesh
from .quadrature import map_tets
from .spaces import DofMap, ElementPair

KERNEL_REL_TOL = 1e-8


@dataclass
class ErrorReport:
    h_max: float
    velocity_H1_error: float
    pressure_L2_error: float
    velocity_L2_error: float = 0.0
    velocity_grad_error: float = 0.0
    norms: dict = field(default_factory=dict)


def _full_cell_rule(mesh: BackgroundMesh, cells: np.ndarray, degree: int):
    pts, w = map_tets(mesh.cell_coords[cells], degree)
    nq = len(w) // max(len(cells), 1)
    return pts, w, np.repeat(cells, nq)


def _fields_at(mesh, dofmap: DofMap, x: np.ndarray, cells: np.ndarray, pts: np.ndarray):
    """Discrete velocity, velocity gradient (n, comp, deriv) and pressure at points."""
    U, P = dofmap.split(x)
    a = dofmap.cell_to_active[cells]
    lam = mesh.barycentric(cells, pts)
    loc = dofmap.vertex_to_dof[mesh.cells[cells]]  # (n, 4)
    Uc = U[loc]  # (n, 4, 3)
    u = np.einsum("ni,nic->nc", lam, Uc)
    G = mesh.barycentric_gradients[cells]
    du = np.einsum("nic,nid->ncd", Uc, G)
    if dofmap.pair is ElementPair.P1P1:
        p = np.einsum("ni,ni->n", lam, P[loc])
    else:
        p = P[a]
    return u, du, p


def compute_errors(
    solution: np.ndarray,
    exact: ProblemData,
    mesh: BackgroundMesh,
    decomposition: CutDecomposition,
    dofmap: DofMap,
    degree: int = 4,
    over: str = "active",
) -> ErrorReport:
    """H1 velocity and L2 pressure errors.

    ``over="active"`` integrates over the full active cells (the fictitious
    domain, using the polynomial extension of the exact solution);
    ``over="physical"`` uses the cut volume rules instead.
    """
    if over == "active":
        pts, w, cells = _full_cell_rule(mesh, dofmap.active_cells, degree)
    elif over == "physical":
        pts, w, cells = decomposition.vol_points, decomposition.vol_weights, decomposition.vol_cells
    else:
        raise ValueError(f"unknown integration region {over!r}")
    u, du, p = _fields_at(mesh, dofmap, solution, cells, pts)
    eu = exact.exact_velocity(pts) - u
    egu = exact.exact_velocity_gradient(pts) - du
    ep = exact.exact_pressure(pts) - p
    l2u = float(w @ np.einsum("nc,nc->n", eu, eu))
    gu = float(w @ np.einsum("ncd,ncd->n", egu, egu))
    l2p = float(w @ ep**2)
    return ErrorReport(
        h_max=mesh.h_max,
        velocity_H1_error=float(np.sqrt(l2u + gu)),
        pressure_L2_error=float(np.sqrt(l2p)),
        velocity_L2_error=float(np.sqrt(l2u)),
        velocity_grad_error=float(np.sqrt(gu)),
    )


def energy_norms(
    x: np.ndarray, mesh: BackgroundMesh, decomposition: CutDecomposition, dofmap: DofMap, degree: int = 2
) -> dict:
    """Squared components of the fictitious-domain velocity/pressure norms."""
    pts, w, cells = _full_cell_rule(mesh, dofmap.active_cells, degree)
    _, du, p = _fields_at(mesh, dofmap, x, cells, pts)
    su, _, _ = _fields_at(mesh, dofmap, x, decomposition.surf_cells, decomposition.surf_points)
    h = mesh.cell_diameter[decomposition.surf_cells]
    return {
        "grad_velocity_sq": float(w @ np.einsum("ncd,ncd->n", du, du)),
        "boundary_velocity_sq": float(decomposition.surf_weights @ (np.einsum("nc,nc->n", su, su) / h)),
        "pressure_sq": float(w @ p**2),
    }


def fit_rate(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("need at least two (h, error) pairs")
    if np.any(pts <= 0):
        raise ValueError("h and error must be positive")
    lh, le = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lh) == 0:
        raise ValueError("all h values coincide; slope undefined")
    slope, _ = np.polyfit(lh, le, 1)
    return float(slope)


class EigenMethod(str, Enum):
    DENSE_EIG = "dense"
    LANCZOS = "lanczos"


@dataclass
class SpectrumReport:
    lambda_max_abs: float
    lambda_min_abs_nonzero: float
    kappa: float
    kappa_scaled: float
    h: float
    kernel_eigenvalue: Optional[float] = None
    kernel_flag: str = ""
    kernel_alignment: Optional[float] = None


def _dense_spectrum(A: np.ndarray, kernel: Optional[np.ndarray], want_vector: bool):
    """Eigenvalues of A; the kernel mode is the one of least modulus."""
    if want_vector:
        lam, V = sla.eigh(A)
    else:
        lam, V = sla.eigh(A, eigvals_only=True), None
    order = np.argsort(np.abs(lam))
    lmax = float(np.abs(lam).max())
    flag = ""
    align = None
    if kernel is None:
        return lmax, float(np.abs(lam[order[0]])), None, flag, align
    k0, k1 = order[0], order[1]
    if abs(lam[k0]) > KERNEL_REL_TOL * lmax:
        flag = "kernel eigenvalue not found"
    elif abs(lam[k1]) <= KERNEL_REL_TOL * lmax:
        flag = "more than one near-zero eigenvalue"
    if V is not None:
        kh = kernel / np.linalg.norm(kernel)
        align = float(abs(V[:, k0] @ kh))
    return lmax, float(abs(lam[k1])), float(lam[k0]), flag, align


def condition_number(
    system_or_matrix,
    method=EigenMethod.DENSE_EIG,
    h: Optional[float] = None,
    kernel: Optional[np.ndarray] = None,
    eigenvector_check: bool = False,
) -> SpectrumReport:
    """kappa = max |lambda| / min nonzero |lambda| of a symmetric matrix.

    For a :class:`StokesSystem` the constant-pressure kernel is excluded.
    ``h`` scales kappa by h^2 (defaults to 1 when a bare matrix is given).
    """
    method = EigenMethod(str(getattr(method, "value", method)).lower())
    if isinstance(system_or_matrix, StokesSystem):
        A = system_or_matrix.matrix
        kernel = system_or_matrix.kernel if kernel is None else kernel
    else:
        A = system_or_matrix
    h = 1.0 if h is None else float(h)

    if method is EigenMethod.DENSE_EIG:
        dense = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
        lmax, lmin, lk, flag, align = _dense_spectrum(dense, kernel, eigenvector_check)
    else:
        lmax, lmin, lk, flag = _lanczos_spectrum(system_or_matrix, A, kernel)
        align = None
    kappa = lmax / lmin if lmin > 0 else np.inf
    return SpectrumReport(lmax, lmin, kappa, kappa * h**2, h, lk, flag, align)


def _lanczos_spectrum(system_or_matrix, A, kernel):
    from .linsolve import KernelSolver

    n = A.shape[0]
    v0 = np.ones(n) / np.sqrt(n)
    top = spla.eigsh(A, k=1, which="LM", v0=v0, tol=1e-12, return_eigenvectors=False)
    lmax = float(abs(top[0]))
    if kernel is None:
        lu = spla.splu(A.tocsc())
        inv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        flag = ""
        lk = None
    else:
        if not isinstance(system_or_matrix, StokesSystem):
            raise TypeError("LANCZOS with a kernel needs a StokesSystem")
        solver = KernelSolver(system_or_matrix)
        inv = spla.LinearOperator((n, n), matvec=solver, dtype=float)
        v0 = v0 - (kernel @ v0) / (kernel @ kernel) * kernel
        res = np.linalg.norm(A @ kernel, np.inf) / np.linalg.norm(kernel, np.inf)
        lk = float(res)
        flag = "" if res <= KERNEL_REL_TOL * lmax else "kernel residual above threshold"
    mu = spla.eigsh(inv, k=1, which="LM", v0=v0, tol=1e-12, return_eigenvectors=False)
    return lmax, float(1.0 / abs(mu[0])), lk, flag
