import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cutstokes import assemble, build_dofmap, classify_and_decompose, project_out_kernel, solve
from cutstokes.experiments import MANUFACTURED, PATCH_PROBLEMS, UNIT_CUBE, ConvergenceConfig, run_patch_tests
from cutstokes.linsolve import KernelSolver

vectors = hnp.arrays(np.float64, 12, elements=st.floats(-1e3, 1e3))


@given(vectors, vectors, st.floats(-1e3, 1e3))
def test_projection_properties(v, k, alpha):
    if np.linalg.norm(k) < 1e-3:
        return
    p = project_out_kernel(v, k)
    assert abs(p @ k) <= 1e-12 * max(np.linalg.norm(v) * np.linalg.norm(k), 1.0)
    assert np.allclose(project_out_kernel(v + alpha * k, k), p, atol=1e-9 * (1 + abs(alpha)) * np.abs(k).max())
    assert np.allclose(project_out_kernel(k, k), 0.0, atol=1e-12 * np.abs(k).max())
    assert np.allclose(project_out_kernel(p, k), p, atol=1e-9 * max(np.abs(v).max(), 1))


def test_projection_rejects_zero_kernel():
    with pytest.raises(ValueError):
        project_out_kernel(np.ones(3), np.zeros(3))


def _system(config="A", N=4, pair="p1p1", data=MANUFACTURED):
    cfg = ConvergenceConfig(config, N, pair)
    mesh = cfg.mesh()
    dec = classify_and_decompose(mesh, UNIT_CUBE)
    dm = build_dofmap(mesh, dec, pair)
    return assemble(mesh, dec, dm, cfg.params, data)


@pytest.fixture(scope="module")
def system_a4():
    return _system()


def test_zero_rhs_gives_zero_solution(system_a4):
    rep = solve(dataclasses.replace(system_a4, rhs=np.zeros(system_a4.n)))
    assert rep.converged and np.all(rep.solution == 0) and rep.iterations == 0


def test_direct_solution_residual_and_gauge(system_a4):
    rep = solve(system_a4, "direct")
    assert rep.converged
    assert rep.relative_residual <= 1e-12
    p = rep.solution[system_a4.dofmap.n_velocity_dofs :]
    assert abs(system_a4.pressure_mass @ p) <= 1e-12 * np.abs(p).max()


def test_gauge_invariance(system_a4):
    ref = solve(system_a4).solution
    shifted = dataclasses.replace(system_a4, rhs=system_a4.rhs + 3.7 * system_a4.kernel)
    assert np.abs(solve(shifted).solution - ref).max() <= 1e-10 * np.abs(ref).max()


def test_direct_and_minres_agree(system_a4):
    d = solve(system_a4, "direct").solution
    m = solve(system_a4, "minres", tol=1e-12)
    assert m.converged and m.iterations > 0
    assert np.abs(d - m.solution).max() <= 1e-6


def test_minres_budget_exhausted(system_a4):
    rep = solve(system_a4, "minres", tol=1e-14, max_iter=5)
    assert not rep.converged
    assert rep.iterations == 5


def test_pivot_failure_reported(system_a4):
    n = system_a4.n
    broken = dataclasses.replace(system_a4, matrix=sp.csr_matrix((n, n)))
    rep = solve(broken, "direct")
    assert not rep.converged
    assert "pivot" in rep.message


def test_kernel_solver_is_pseudo_inverse():
    system = _system("B", 2, "p1p0")
    solver = KernelSolver(system)
    rng = np.random.default_rng(1)
    b = project_out_kernel(rng.normal(size=system.n), system.kernel)
    x = solver(b)
    assert abs(x @ system.kernel) <= 1e-10 * np.linalg.norm(x)
    assert np.linalg.norm(system.matrix @ x - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("N", [2, 4])
def test_patch_tests_reproduce_linear_solutions(N):
    results = run_patch_tests("B", [N])
    by = {(r.name, r.pair): r for r in results}
    assert by[("linear_velocity", "p1p1")].max_dof_error <= 1e-8
    assert by[("linear_velocity", "p1p0")].max_dof_error <= 1e-8
    assert by[("linear_pressure", "p1p1")].max_dof_error <= 1e-8
    assert by[("linear_pressure", "p1p0")].status == "skip"


def test_patch_solution_values():
    data, _ = PATCH_PROBLEMS["linear_pressure"]
    system = _system("B", 4, "p1p1", data)
    x = solve(system).solution
    dm = system.dofmap
    cfg = ConvergenceConfig("B", 4)
    verts = cfg.mesh().vertices[dm.active_vertices]
    assert np.abs(x[dm.n_velocity_dofs :] - (0.5 - verts[:, 0])).max() <= 1e-8
    assert np.abs(x[: dm.n_velocity_dofs]).max() <= 1e-8


def test_zero_gamma_patch_test_fails():
    results = run_patch_tests("B", [4], ["p1p1"], {"gamma": 0.0})
    assert all(r.status == "fail" for r in results)
