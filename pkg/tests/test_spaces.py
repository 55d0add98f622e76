import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cutstokes import (
    Box,
    ElementPair,
    PolytopeDomain,
    build_dofmap,
    build_structured_tet_mesh,
    classify_and_decompose,
    eval_basis,
)
from cutstokes.mesh import MeshTopologyError


@pytest.fixture(scope="module")
def unit_all_active(single_cube_mesh, unit_cube):
    return single_cube_mesh, classify_and_decompose(single_cube_mesh, unit_cube)


def test_dof_counts_single_cube(unit_all_active):
    mesh, dec = unit_all_active
    assert build_dofmap(mesh, dec, "p1p1").n_dofs == 32
    dm = build_dofmap(mesh, dec, ElementPair.P1P0)
    assert (dm.n_velocity_dofs, dm.n_pressure_dofs) == (24, 6)


def test_dof_count_box_test_mesh():
    mesh = build_structured_tet_mesh(Box.cube(-1.0, 1.0), (10, 10, 10))
    dec = classify_and_decompose(mesh, PolytopeDomain.box([-0.99] * 3, [0.99] * 3), 2, 2)
    assert build_dofmap(mesh, dec, "p1p1").n_dofs == 4 * 11**3


def test_kernel_vector_and_layout(unit_all_active):
    mesh, dec = unit_all_active
    dm = build_dofmap(mesh, dec, "p1p1")
    k = dm.pressure_kernel_vector
    assert np.all(k[: dm.n_velocity_dofs] == 0) and np.all(k[dm.n_velocity_dofs :] == 1)
    # velocity dofs interleaved per vertex
    v = mesh.cells[0, 2]
    assert list(dm.cell_to_velocity_dofs[0, 6:9]) == [3 * dm.vertex_to_dof[v] + c for c in range(3)]


def test_inactive_dofs_excluded():
    mesh = build_structured_tet_mesh(Box.cube(0.0, 1.0), (4, 4, 4))
    dec = classify_and_decompose(mesh, PolytopeDomain.box([0.1] * 3, [0.45] * 3))
    dm = build_dofmap(mesh, dec, "p1p1")
    used = np.unique(mesh.cells[dec.active_cells])
    assert dm.n_pressure_dofs == len(used) < mesh.n_vertices
    assert np.all(dm.vertex_to_dof[np.setdiff1d(np.arange(mesh.n_vertices), used)] == -1)


def test_basis_examples():
    from cutstokes import mesh_from_arrays

    m = mesh_from_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]])
    lam, g = eval_basis(m, 0, [[0.25, 0.25, 0.25]])
    assert np.allclose(lam, 0.25)
    assert np.allclose(g[0], [-1, -1, -1])
    lam, _ = eval_basis(m, 0, m.vertices)
    assert np.allclose(lam, np.eye(4))


@given(st.integers(0, 47), st.integers(0, 2**32 - 1))
def test_partition_of_unity(cell, seed):
    mesh = build_structured_tet_mesh(Box((0, -1, 2), (1.5, 1, 3)), (2, 2, 2))
    rng = np.random.default_rng(seed)
    b = rng.dirichlet(np.ones(4), 20)
    pts = b @ mesh.cell_coords[cell]
    lam, g = eval_basis(mesh, cell, pts)
    assert np.abs(lam.sum(axis=1) - 1).max() < 1e-13
    assert np.abs(g.sum(axis=0)).max() < 1e-13
    assert np.allclose(lam, b, atol=1e-13)


def test_degenerate_cell_rejected():
    from cutstokes.mesh import BackgroundMesh

    m = build_structured_tet_mesh(Box.cube(0.0, 1.0), (1, 1, 1))
    flat = m.vertices.copy()
    flat[:, 2] = 0.0
    bad = BackgroundMesh(flat, m.cells, m.facets, m.facet_cells, m.cell_diameter, m.facet_diameter, m.cell_facets)
    with pytest.raises(MeshTopologyError):
        eval_basis(bad, 0, [[0.1, 0.1, 0.0]])


def test_linear_field_reproduced_at_quadrature_points(rng):
    mesh = build_structured_tet_mesh(Box.cube(-0.1, 1.1), (3, 3, 3))
    dec = classify_and_decompose(mesh, PolytopeDomain.box([0] * 3, [1] * 3))
    dm = build_dofmap(mesh, dec, "p1p1")
    A, c = rng.normal(size=(3, 3)), rng.normal(size=3)

    def u(x):
        return x @ A.T + c

    x = dm.interpolate(mesh, u=u, p=lambda x: x[:, 0] - 2 * x[:, 2])
    U, P = dm.split(x)
    lam = mesh.barycentric(dec.vol_cells, dec.vol_points)
    loc = dm.vertex_to_dof[mesh.cells[dec.vol_cells]]
    uh = np.einsum("ni,nic->nc", lam, U[loc])
    ph = np.einsum("ni,ni->n", lam, P[loc])
    assert np.abs(uh - u(dec.vol_points)).max() < 1e-12
    assert np.abs(ph - (dec.vol_points[:, 0] - 2 * dec.vol_points[:, 2])).max() < 1e-12
