"""Convergence, condition-number and patch-test experiments."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import EigenMethod, compute_errors, condition_number, fit_rate
from .cutgeom import CutDecomposition, classify_and_decompose
from .forms import ProblemData, StabilizationParams, assemble
from .linsolve import solve
from .mesh import BackgroundMesh, Box, build_structured_tet_mesh
from .polytope import PolytopeDomain
from .spaces import ElementPair, build_dofmap

log = logging.getLogger(__name__)

DELTA = 0.01
CONFIGS = ("A", "B", "C")
DEFAULT_N = (4, 6, 8, 12)
TABLE_L = (0.990, 0.950, 0.910, 0.901)
TABLE_BETA = (0.0, 0.001, 0.01, 0.025, 0.05, 0.1, 1.0, 10.0)

UNIT_CUBE = PolytopeDomain.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])


def _workers() -> int:
    return max(1, int(os.environ.get("CUTSTOKES_WORKERS", "1")))


def _map(fn, tasks):
    tasks = list(tasks)
    if _workers() == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(fn, tasks))


# ---- manufactured solution on [0, 1]^3

def exact_velocity(x):
    y, z = x[:, 1], x[:, 2]
    u = np.zeros_like(x)
    u[:, 0] = y * (1 - y) * z * (1 - z)
    return u


def exact_velocity_gradient(x):
    y, z = x[:, 1], x[:, 2]
    g = np.zeros((len(x), 3, 3))
    g[:, 0, 1] = (1 - 2 * y) * z * (1 - z)
    g[:, 0, 2] = y * (1 - y) * (1 - 2 * z)
    return g


def exact_pressure(x):
    return 0.5 - x[:, 0]


def body_force(x):
    # -laplace(u) + grad(p)
    y, z = x[:, 1], x[:, 2]
    f = np.zeros_like(x)
    f[:, 0] = 2 * z * (1 - z) + 2 * y * (1 - y) - 1
    return f


MANUFACTURED = ProblemData(
    body_force=body_force,
    boundary_velocity=exact_velocity,
    exact_velocity=exact_velocity,
    exact_velocity_gradient=exact_velocity_gradient,
    exact_pressure=exact_pressure,
)


# ---- configurations

@dataclass(frozen=True)
class ConvergenceConfig:
    config: str
    N: int
    pair: ElementPair = ElementPair.P1P1
    params: Optional[StabilizationParams] = None
    delta: float = DELTA

    def __post_init__(self):
        if self.config not in CONFIGS:
            raise ValueError(f"unknown configuration {self.config!r}")
        if self.N < 1:
            raise ValueError("N must be positive")
        object.__setattr__(self, "pair", ElementPair.parse(self.pair))
        if self.params is None:
            object.__setattr__(self, "params", StabilizationParams.defaults(self.pair))

    @property
    def h(self) -> float:
        return 1.0 / self.N

    def background(self) -> tuple[Box, int]:
        h, d = self.h, self.delta
        if self.config == "A":
            return Box.cube(-h * d, 1 + h * d), self.N
        if self.config == "B":
            return Box.cube(-h / 3, 1 + h / 3), self.N
        return Box.cube(-h * (1 - d), 1 + h * (1 - d)), self.N + 2

    def mesh(self) -> BackgroundMesh:
        box, n = self.background()
        return build_structured_tet_mesh(box, (n, n, n))


@dataclass(frozen=True)
class ConditionConfig:
    l: float
    beta: float
    pair: ElementPair = ElementPair.P1P1

    def __post_init__(self):
        object.__setattr__(self, "pair", ElementPair.parse(self.pair))

    @property
    def params(self) -> StabilizationParams:
        b3 = self.beta if self.pair is ElementPair.P1P1 else 0.0
        return StabilizationParams(beta0=0.1, beta1=0.1, beta2=self.beta, beta3=b3, gamma=10.0)

    @staticmethod
    def mesh() -> BackgroundMesh:
        return build_structured_tet_mesh(Box.cube(-1.0, 1.0), (10, 10, 10))

    def domain(self) -> PolytopeDomain:
        return PolytopeDomain.box([-self.l] * 3, [self.l] * 3)


# ---- convergence study

@dataclass
class ConvergenceRow:
    config: str
    pair: str
    N: int
    h_max: float
    err_u_H1: float
    err_p_L2: float
    n_dofs: int = 0
    status: str = "ok"


def solve_convergence_case(cfg: ConvergenceConfig, solver: str = "direct", quad_degree: int = 4):
    """Returns (row, solution, mesh, decomposition, dofmap)."""
    mesh = cfg.mesh()
    dec = classify_and_decompose(mesh, UNIT_CUBE, quad_degree, quad_degree)
    dm = build_dofmap(mesh, dec, cfg.pair)
    system = assemble(mesh, dec, dm, cfg.params, MANUFACTURED)
    rep = solve(system, solver)
    if not rep.converged:
        row = ConvergenceRow(cfg.config, cfg.pair.value, cfg.N, mesh.h_max, np.nan, np.nan, dm.n_dofs, f"failed: {rep.message}")
        return row, rep.solution, mesh, dec, dm
    err = compute_errors(rep.solution, MANUFACTURED, mesh, dec, dm, degree=quad_degree)
    row = ConvergenceRow(cfg.config, cfg.pair.value, cfg.N, mesh.h_max, err.velocity_H1_error, err.pressure_L2_error, dm.n_dofs)
    return row, rep.solution, mesh, dec, dm


def _convergence_task(args) -> ConvergenceRow:
    cfg, solver, quad_degree = args
    try:
        return solve_convergence_case(cfg, solver, quad_degree)[0]
    except Exception as exc:  # recorded per row
        log.exception("convergence case %s failed", cfg)
        return ConvergenceRow(cfg.config, cfg.pair.value, cfg.N, np.nan, np.nan, np.nan, 0, f"failed: {exc}")


def run_convergence(
    configs: Iterable[str] = CONFIGS,
    pairs: Iterable = (ElementPair.P1P1, ElementPair.P1P0),
    N_list: Sequence[int] = DEFAULT_N,
    solver: str = "direct",
    quad_degree: int = 4,
    params: Optional[dict] = None,
) -> tuple[list[ConvergenceRow], dict]:
    """One row per (config, pair, N) plus fitted slopes per (config, pair)."""
    N_list = list(N_list)
    if N_list != sorted(N_list):
        raise ValueError("N_list must be ascending")
    tasks = []
    for c in configs:
        for pair in pairs:
            pair = ElementPair.parse(pair)
            p = StabilizationParams.defaults(pair)
            if params:
                p = p.replace(**params)
            for N in N_list:
                tasks.append((ConvergenceConfig(c, N, pair, p), solver, quad_degree))
    rows = _map(_convergence_task, tasks)
    return rows, fit_slopes(rows)


def fit_slopes(rows: Sequence[ConvergenceRow]) -> dict:
    groups: dict[str, list[ConvergenceRow]] = {}
    for r in rows:
        groups.setdefault(f"{r.config}/{r.pair}", []).append(r)
    out = {}
    for key, rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        entry = {"n_points": len(ok)}
        if len(ok) >= 2 and len({r.h_max for r in ok}) >= 2:
            entry["velocity_H1"] = fit_rate([(r.h_max, r.err_u_H1) for r in ok])
            entry["pressure_L2"] = fit_rate([(r.h_max, r.err_p_L2) for r in ok])
        out[key] = entry
    return out


# ---- condition-number sweep

@dataclass
class ConditionRow:
    pair: str
    l: float
    beta: float
    n_dofs: int
    kappa: float
    kappa_scaled: float
    lambda_max: float
    lambda_min: float
    flag: str = ""
    status: str = "ok"


def condition_case(cfg: ConditionConfig, method="lanczos", mesh=None, decomposition=None) -> ConditionRow:
    mesh = mesh or cfg.mesh()
    dec = decomposition or classify_and_decompose(mesh, cfg.domain(), 2, 2)
    dm = build_dofmap(mesh, dec, cfg.pair)
    system = assemble(mesh, dec, dm, cfg.params)
    rep = condition_number(system, method, h=mesh.h_max)
    return ConditionRow(
        cfg.pair.value, cfg.l, cfg.beta, dm.n_dofs, rep.kappa, rep.kappa_scaled,
        rep.lambda_max_abs, rep.lambda_min_abs_nonzero, rep.kernel_flag,
    )


def _condition_group(args) -> list[ConditionRow]:
    l, betas, pair, method = args
    mesh = ConditionConfig.mesh()
    try:
        dec = classify_and_decompose(mesh, ConditionConfig(l, 0.0, pair).domain(), 2, 2)
    except Exception as exc:
        return [ConditionRow(ElementPair.parse(pair).value, l, b, 0, np.nan, np.nan, np.nan, np.nan, "", f"failed: {exc}") for b in betas]
    rows = []
    for b in betas:
        cfg = ConditionConfig(l, b, pair)
        try:
            rows.append(condition_case(cfg, method, mesh, dec))
        except Exception as exc:  # eigen-solver failure recorded per cell
            log.exception("condition case %s failed", cfg)
            rows.append(ConditionRow(cfg.pair.value, l, b, 0, np.nan, np.nan, np.nan, np.nan, "", f"failed: {exc}"))
    return rows


def run_condition_sweep(
    l_list: Sequence[float] = TABLE_L,
    beta_list: Sequence[float] = TABLE_BETA,
    pair=ElementPair.P1P1,
    method="lanczos",
) -> list[ConditionRow]:
    """Rows ordered beta-major, l-minor (the table layout)."""
    groups = _map(_condition_group, [(l, list(beta_list), pair, method) for l in l_list])
    by_key = {(r.beta, r.l): r for g in groups for r in g}
    return [by_key[(b, l)] for b in beta_list for l in l_list]


# ---- consistency patch tests

@dataclass
class PatchResult:
    name: str
    pair: str
    N: int
    max_dof_error: float
    status: str  # pass / fail / skip
    reason: str = ""


def _linear_velocity(x):
    return np.column_stack([x[:, 1], x[:, 0], np.zeros(len(x))])


def _linear_velocity_grad(x):
    g = np.zeros((len(x), 3, 3))
    g[:, 0, 1] = 1.0
    g[:, 1, 0] = 1.0
    return g


PATCH_PROBLEMS = {
    "linear_velocity": (
        ProblemData(
            boundary_velocity=_linear_velocity,
            exact_velocity=_linear_velocity,
            exact_velocity_gradient=_linear_velocity_grad,
            exact_pressure=lambda x: np.zeros(len(x)),
        ),
        {ElementPair.P1P1, ElementPair.P1P0},
    ),
    "linear_pressure": (
        ProblemData(
            body_force=lambda x: np.tile([-1.0, 0.0, 0.0], (len(x), 1)),
            exact_velocity=lambda x: np.zeros_like(x),
            exact_velocity_gradient=lambda x: np.zeros((len(x), 3, 3)),
            exact_pressure=exact_pressure,
        ),
        {ElementPair.P1P1},
    ),
}


def run_patch_tests(
    config: str = "B",
    N_list: Sequence[int] = (4,),
    pairs: Iterable = (ElementPair.P1P1, ElementPair.P1P0),
    params: Optional[dict] = None,
    tol: float = 1e-8,
) -> list[PatchResult]:
    out = []
    for N in N_list:
        base = ConvergenceConfig(config, N)
        mesh = base.mesh()
        dec = classify_and_decompose(mesh, UNIT_CUBE)
        for pair in pairs:
            pair = ElementPair.parse(pair)
            dm = build_dofmap(mesh, dec, pair)
            p = StabilizationParams.defaults(pair)
            if params:
                p = p.replace(**params)
            for name, (data, supported) in PATCH_PROBLEMS.items():
                if pair not in supported:
                    out.append(PatchResult(name, pair.value, N, np.nan, "skip", "exact pressure is not in the P0 space"))
                    continue
                try:
                    p.require_solvable()
                except ValueError as exc:
                    out.append(PatchResult(name, pair.value, N, np.nan, "fail", str(exc)))
                    continue
                system = assemble(mesh, dec, dm, p, data)
                rep = solve(system, "direct")
                if not rep.converged:
                    out.append(PatchResult(name, pair.value, N, np.nan, "fail", rep.message))
                    continue
                exact = dm.interpolate(mesh, u=data.exact_velocity, p=data.exact_pressure)
                err = float(np.max(np.abs(rep.solution - exact)))
                status = "pass" if err <= tol else "fail"
                out.append(PatchResult(name, pair.value, N, err, status, "" if status == "pass" else f"error {err:.3e} > {tol:g}"))
    return out


# ---- output

def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(v) for v in r])


def condition_table(rows: Sequence[ConditionRow]) -> tuple[list[str], list[list]]:
    """Wide layout: one row per beta, one column per l."""
    ls = sorted({r.l for r in rows}, reverse=True)
    betas = list(dict.fromkeys(r.beta for r in rows))
    cell = {(r.beta, r.l): r.kappa_scaled for r in rows}
    header = ["beta"] + [f"l={format_value(float(l))}" for l in ls]
    body = [[float(b)] + [cell.get((b, l), np.nan) for l in ls] for b in betas]
    return header, body
