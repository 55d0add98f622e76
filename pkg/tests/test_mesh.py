import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cutstokes.mesh import NONE, Box, MeshTopologyError, build_facet_topology, build_structured_tet_mesh, mesh_from_arrays


def test_single_cube_counts(single_cube_mesh):
    m = single_cube_mesh
    assert m.n_vertices == 8
    assert m.n_cells == 6
    assert len(m.exterior_facets) == 12
    assert len(m.interior_facets) == 6


def test_all_tets_share_main_diagonal(single_cube_mesh):
    lo, hi = 0, 7  # lattice ids of (0,0,0) and (1,1,1)
    for c in single_cube_mesh.cells:
        assert lo in c and hi in c


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_volumes_positive_and_sum_to_box(nx, ny, nz):
    box = Box((-0.3, 0.0, 1.0), (0.7, 2.0, 1.5))
    m = build_structured_tet_mesh(box, (nx, ny, nz))
    assert m.n_cells == 6 * nx * ny * nz
    assert np.all(m.cell_volume > 0)
    assert m.cell_volume.sum() == pytest.approx(box.volume, rel=1e-13)
    # exterior facet area equals the box surface (watertight)
    ext = m.facet_area[m.exterior_facets].sum()
    dx = np.subtract(box.hi, box.lo)
    assert ext == pytest.approx(2 * (dx[0] * dx[1] + dx[1] * dx[2] + dx[0] * dx[2]), rel=1e-13)


def test_box_faces_exact():
    m = build_structured_tet_mesh(Box.cube(-1 / 3, 1 + 1 / 3), (3, 3, 3))
    assert m.vertices.max() == 1 + 1 / 3
    assert m.vertices.min() == -1 / 3


def test_diameter_is_longest_edge():
    m = build_structured_tet_mesh(Box.cube(-1.0, 1.0), (10, 10, 10))
    # each Kuhn tet contains the cube diagonal
    assert m.h_max == pytest.approx(0.2 * np.sqrt(3), rel=1e-14)
    assert np.allclose(m.cell_diameter, 0.2 * np.sqrt(3))


def test_facet_normals_point_into_lower_cell():
    m = build_structured_tet_mesh(Box.cube(0.0, 1.0), (2, 2, 2))
    f = m.interior_facets
    ctr_plus = m.cell_coords[m.facet_cells[f, 0]].mean(axis=1)
    ctr_minus = m.cell_coords[m.facet_cells[f, 1]].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", m.facet_normal[f], ctr_plus - ctr_minus) > 0)
    assert np.allclose(np.linalg.norm(m.facet_normal, axis=1), 1.0)
    assert np.all(m.facet_cells[f, 0] < m.facet_cells[f, 1])


def test_cell_facets_are_opposite_vertices(single_cube_mesh):
    m = single_cube_mesh
    for c in range(m.n_cells):
        for i in range(4):
            assert m.cells[c, i] not in m.facets[m.cell_facets[c, i]]


def test_barycentric_gradients_sum_to_zero():
    m = build_structured_tet_mesh(Box.cube(0.0, 1.0), (2, 3, 1))
    assert np.abs(m.barycentric_gradients.sum(axis=1)).max() < 1e-13


def test_non_manifold_facet_rejected():
    cells = np.array([[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])
    with pytest.raises(MeshTopologyError):
        build_facet_topology(cells)


def test_degenerate_divisions_rejected():
    with pytest.raises(ValueError):
        build_structured_tet_mesh(Box.cube(0.0, 1.0), (0, 1, 1))
    with pytest.raises(ValueError):
        Box((0, 0, 0), (1, 0, 1))


def test_mesh_from_arrays_orients_cells():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    m = mesh_from_arrays(v, [[0, 2, 1, 3]])
    assert m.cell_volume[0] == pytest.approx(1 / 6)
    assert np.all(m.facet_cells[:, 1] == NONE)


def test_write_text_round_trip(tmp_path, single_cube_mesh):
    path = tmp_path / "mesh.txt"
    single_cube_mesh.write_text(path)
    lines = path.read_text().splitlines()
    nv = int(lines[0])
    verts = np.loadtxt(lines[1 : 1 + nv])
    nc = int(lines[1 + nv])
    cells = np.loadtxt(lines[2 + nv : 2 + nv + nc], dtype=int)
    assert np.array_equal(verts, single_cube_mesh.vertices)
    assert np.array_equal(cells, single_cube_mesh.cells)
