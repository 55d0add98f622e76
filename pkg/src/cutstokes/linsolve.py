"""Solvers for the singular symmetric saddle-point system.

DIRECT factorizes the bordered matrix

    [ A    k ]
    [ k^T  0 ]

with SuperLU (COLAMD column ordering, partial pivoting threshold 1.0).  The
border row fixes the kernel component to zero, so the factorized matrix is
nonsingular whenever the kernel of A is exactly span{k}.

MINRES runs on P A P with P the orthogonal projector onto k^perp; the
right-hand side is projected first and the iterate is projected on exit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import StokesSystem

log = logging.getLogger(__name__)


class Method(str, Enum):
    DIRECT = "direct"
    MINRES = "minres"


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    relative_residual: float
    iterations: int
    pressure_mean: float
    converged: bool
    message: str = ""


def project_out_kernel(vector: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    k = np.asarray(kernel, dtype=float)
    kk = k @ k
    if kk == 0:
        raise ValueError("kernel vector is zero")
    v = np.asarray(vector, dtype=float)
    return v - (k @ v / kk) * k


def bordered_matrix(system: StokesSystem) -> sp.csc_matrix:
    k = sp.csr_matrix(system.kernel[:, None])
    return sp.bmat([[system.matrix, k], [k.T, None]], format="csc")


class KernelSolver:
    """Factorized pseudo-inverse: x = A^+ b for b orthogonal to the kernel."""

    def __init__(self, system: StokesSystem):
        self.n = system.n
        self.kernel = system.kernel
        self.lu = spla.splu(bordered_matrix(system), permc_spec="COLAMD", diag_pivot_thresh=1.0)

    def __call__(self, b: np.ndarray) -> np.ndarray:
        rhs = np.append(project_out_kernel(b, self.kernel), 0.0)
        return project_out_kernel(self.lu.solve(rhs)[: self.n], self.kernel)


def _normalize_pressure(system: StokesSystem, x: np.ndarray) -> tuple[np.ndarray, float]:
    dm = system.dofmap
    p = x[dm.n_velocity_dofs :]
    mean = float(system.pressure_mass @ p / system.pressure_mass.sum())
    y = x.copy()
    y[dm.n_velocity_dofs :] -= mean
    return y, mean


def solve(system: StokesSystem, method="direct", tol: float = 1e-12, max_iter: int = 20000) -> SolveReport:
    method = Method(str(getattr(method, "value", method)).lower())
    A, k = system.matrix, system.kernel
    b = project_out_kernel(system.rhs, k)
    bnorm = np.linalg.norm(b)
    n = system.n

    if bnorm == 0:
        return SolveReport(np.zeros(n), 0.0, 0.0, 0, 0.0, True, "zero right-hand side")

    iterations = 0
    if method is Method.DIRECT:
        try:
            x = KernelSolver(system)(b)
        except RuntimeError as exc:  # SuperLU: exactly singular factor
            return SolveReport(np.full(n, np.nan), np.inf, np.inf, 0, np.nan, False, f"pivot failure: {exc}")
    else:
        def matvec(v):
            return project_out_kernel(A @ project_out_kernel(v, k), k)

        op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.minres(op, b, rtol=tol, maxiter=max_iter, callback=cb)
        iterations = count[0]
        x = project_out_kernel(x, k)
        if info != 0:
            res = np.linalg.norm(A @ x - b)
            log.warning("MINRES did not converge in %d iterations", iterations)
            y, mean = _normalize_pressure(system, x)
            return SolveReport(y, res, res / bnorm, iterations, mean, False, f"minres info={info}")

    res = float(np.linalg.norm(A @ x - b))
    if not np.isfinite(res):
        return SolveReport(x, np.inf, np.inf, iterations, np.nan, False, "non-finite solution")
    y, mean = _normalize_pressure(system, x)
    rel = res / bnorm
    ok = rel <= max(tol, 1e-8)
    return SolveReport(y, res, rel, iterations, mean, ok, "" if ok else "residual above tolerance")
