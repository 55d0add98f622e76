import numpy as np
import pytest

from cutstokes import ElementPair
from cutstokes.experiments import (
    MANUFACTURED,
    ConditionConfig,
    ConvergenceConfig,
    ConvergenceRow,
    condition_table,
    fit_slopes,
    format_value,
    run_condition_sweep,
    run_convergence,
    write_csv,
)


def test_manufactured_force_is_minus_laplacian_plus_grad_p(rng):
    x = rng.random((50, 3))
    eps = 1e-4
    lap = np.zeros((50, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = eps
        lap += (MANUFACTURED.exact_velocity(x + e) - 2 * MANUFACTURED.exact_velocity(x) + MANUFACTURED.exact_velocity(x - e)) / eps**2
    gp = np.column_stack([(MANUFACTURED.exact_pressure(x + np.eye(3)[k] * eps) - MANUFACTURED.exact_pressure(x - np.eye(3)[k] * eps)) / (2 * eps) for k in range(3)])
    assert np.allclose(-lap + gp, MANUFACTURED.body_force(x), atol=1e-6)
    # divergence free and vanishing on the cube boundary except where y, z are interior
    g = MANUFACTURED.exact_velocity_gradient(x)
    assert np.allclose(np.trace(g, axis1=1, axis2=2), 0)


@pytest.mark.parametrize("N", [2, 4])
def test_configuration_geometry(N):
    h = 1 / N
    a = ConvergenceConfig("A", N).background()
    assert a[0].lo[0] == pytest.approx(-h * 0.01) and a[1] == N
    b = ConvergenceConfig("B", N).background()
    assert b[0].hi[2] == pytest.approx(1 + h / 3) and b[1] == N
    c = ConvergenceConfig("C", N)
    assert c.background()[0].lo[1] == pytest.approx(-h * 0.99)
    assert c.mesh().n_cells == 6 * (N + 2) ** 3


def test_config_validation():
    with pytest.raises(ValueError):
        ConvergenceConfig("D", 4)
    with pytest.raises(ValueError):
        ConvergenceConfig("A", 0)
    with pytest.raises(ValueError):
        run_convergence(["A"], ["p1p1"], [8, 4])


def test_condition_config_params():
    p = ConditionConfig(0.95, 0.025, "p1p1").params
    assert (p.beta0, p.beta1, p.beta2, p.beta3, p.gamma) == (0.1, 0.1, 0.025, 0.025, 10.0)
    p = ConditionConfig(0.95, 0.025, "p1p0").params
    assert (p.beta2, p.beta3) == (0.025, 0.0)
    assert ConditionConfig.mesh().n_cells == 6000


def test_convergence_config_a_decreasing():
    # slopes over the full N list are checked in the acceptance suite
    rows, slopes = run_convergence(["A"], [ElementPair.P1P1], [4, 8])
    assert [r.N for r in rows] == [4, 8]
    assert rows[1].err_u_H1 < rows[0].err_u_H1
    assert rows[1].err_p_L2 < rows[0].err_p_L2
    assert slopes["A/p1p1"]["n_points"] == 2


def test_fit_slopes_skips_failed_rows():
    rows = [
        ConvergenceRow("A", "p1p1", 4, 0.4, 0.1, 0.1),
        ConvergenceRow("A", "p1p1", 8, 0.2, 0.05, 0.05),
        ConvergenceRow("A", "p1p1", 12, np.nan, np.nan, np.nan, status="failed: x"),
    ]
    s = fit_slopes(rows)["A/p1p1"]
    assert s["n_points"] == 2 and s["velocity_H1"] == pytest.approx(1.0)


def test_condition_sweep_layout_small():
    rows = run_condition_sweep([0.95], [0.1, 1.0], "p1p0")
    assert [(r.beta, r.l) for r in rows] == [(0.1, 0.95), (1.0, 0.95)]
    header, body = condition_table(rows)
    assert header == ["beta", "l=0.94999999999999996"]
    assert body[0][1] == rows[0].kappa_scaled
    assert rows[1].kappa_scaled > rows[0].kappa_scaled


def test_csv_formatting_is_exact(tmp_path):
    v = 0.1 + 0.2
    assert float(format_value(v)) == v
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [[1, v], ["s", np.float64(1e-300)]])
    assert p.read_text() == "a,b\n1,0.30000000000000004\ns,1e-300\n"
