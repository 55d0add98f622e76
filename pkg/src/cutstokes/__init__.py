"""Fictitious-domain Stokes solver with stabilized Nitsche and ghost penalties.

Domains are convex polytopes embedded in a structured tetrahedral background
mesh; velocities are continuous P1, pressures P1 or piecewise constant.
"""

from .analysis import EigenMethod, ErrorReport, SpectrumReport, compute_errors, condition_number, energy_norms, fit_rate
from .cutgeom import CellKind, CutDecomposition, boundary_fitted_decomposition, classify_and_decompose
from .forms import ProblemData, StabilizationParams, StokesSystem, assemble, jump_eval
from .linsolve import Method, SolveReport, project_out_kernel, solve
from .mesh import BackgroundMesh, Box, build_structured_tet_mesh, mesh_from_arrays
from .polytope import ClippedPolyhedron, PolytopeDomain, clip_tetrahedron, polygon_area, polyhedron_volume
from .spaces import DofMap, ElementPair, build_dofmap, eval_basis

__version__ = "0.1.0"

__all__ = [
    "BackgroundMesh",
    "Box",
    "CellKind",
    "ClippedPolyhedron",
    "CutDecomposition",
    "DofMap",
    "EigenMethod",
    "ElementPair",
    "ErrorReport",
    "Method",
    "PolytopeDomain",
    "ProblemData",
    "SolveReport",
    "SpectrumReport",
    "StabilizationParams",
    "StokesSystem",
    "assemble",
    "boundary_fitted_decomposition",
    "build_dofmap",
    "build_structured_tet_mesh",
    "classify_and_decompose",
    "clip_tetrahedron",
    "compute_errors",
    "condition_number",
    "energy_norms",
    "eval_basis",
    "fit_rate",
    "jump_eval",
    "mesh_from_arrays",
    "polygon_area",
    "polyhedron_volume",
    "project_out_kernel",
    "solve",
]
