"""Command-line front end.

    python -m cutstokes convergence --config A --pair p1p1 --n 4,8 --out runs/a
    python -m cutstokes condition --pair p1p1 --beta 0,0.025 --l 0.901 --out runs/k
    python -m cutstokes patchtest

Exit codes: 0 success, 1 a run failed (partial results are still written and
flagged), 2 bad flags.  The worker count comes from CUTSTOKES_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import EigenMethod
from .experiments import (
    CONFIGS,
    DEFAULT_N,
    TABLE_BETA,
    TABLE_L,
    condition_table,
    run_condition_sweep,
    run_convergence,
    run_patch_tests,
    write_csv,
)
from .forms import StabilizationParams
from .spaces import ElementPair

SCHEMA_VERSION = 1
LARGE_N = 12
CONVERGENCE_COLUMNS = ["config", "pair", "N", "h_max", "err_u_H1", "err_p_L2", "n_dofs", "status"]
CONDITION_LONG_COLUMNS = ["pair", "l", "beta", "n_dofs", "kappa", "kappa_scaled", "lambda_max", "lambda_min", "flag", "status"]

log = logging.getLogger("cutstokes")


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    deterministic: bool = True
    outputs: list = field(default_factory=list)
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    wall_clock_seconds: float = 0.0
    workers: int = 1

    def write(self, out: Path) -> None:
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


# ---- flag parsing

def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("N values must be positive integers")
    if vals != sorted(set(vals)):
        raise argparse.ArgumentTypeError("N values must be strictly ascending")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _l_list(text: str) -> list[float]:
    vals = _float_list(text)
    if any(not 0.0 < v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("l must lie in (0, 1]")
    # exactly on a grid plane of the 10^3 mesh the cut degenerates
    if any(abs(v * 5 - round(v * 5)) < 1e-12 and v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("l on a background grid plane gives degenerate cuts")
    return vals


def _beta_list(text: str) -> list[float]:
    vals = _float_list(text)
    if any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("beta must be non-negative")
    return vals


_PARAM_KEYS = {"beta0", "beta1", "beta2", "beta3", "gamma"}


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in _PARAM_KEYS:
            raise argparse.ArgumentTypeError(f"bad parameter {item!r}; keys are {sorted(_PARAM_KEYS)}")
        try:
            out[key] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value in {item!r}")
        if out[key] < 0:
            raise argparse.ArgumentTypeError(f"{key} must be non-negative")
    return out


def _pairs(value: str) -> list[ElementPair]:
    return [ElementPair.P1P1, ElementPair.P1P0] if value == "both" else [ElementPair.parse(value)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cutstokes", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convergence", help="mesh-convergence study on the unit cube")
    c.add_argument("--config", choices=[*CONFIGS, "all"], default="all")
    c.add_argument("--pair", choices=["p1p1", "p1p0", "both"], default="both")
    c.add_argument("--n", type=_int_list, default=list(DEFAULT_N), help="ascending cube counts, e.g. 4,6,8,12")
    c.add_argument("--out", type=Path, default=Path("runs/convergence"))
    c.add_argument("--solver", choices=["direct", "minres"], default="direct")
    c.add_argument("--quad-degree", type=int, default=4, help="degree of the error quadrature")
    c.add_argument("--params", type=_params, default={}, help="overrides such as beta2=0.5,gamma=20")
    c.add_argument("--large", action="store_true", help=f"allow N > {LARGE_N}")

    k = sub.add_parser("condition", help="scaled condition numbers on the box test")
    k.add_argument("--pair", choices=["p1p1", "p1p0"], default="p1p1")
    k.add_argument("--l", type=_l_list, default=list(TABLE_L), help="half-widths of the inner box")
    k.add_argument("--beta", type=_beta_list, default=list(TABLE_BETA), help="ghost-penalty weights")
    k.add_argument("--method", choices=[m.value for m in EigenMethod], default="lanczos")
    k.add_argument("--out", type=Path, default=Path("runs/condition"))

    t = sub.add_parser("patchtest", help="consistency patch tests (smoke suite)")
    t.add_argument("--config", choices=list(CONFIGS), default="B")
    t.add_argument("--pair", choices=["p1p1", "p1p0", "both"], default="both")
    t.add_argument("--n", type=_int_list, default=[4])
    t.add_argument("--params", type=_params, default={}, help="overrides such as gamma=0")
    t.add_argument("--out", type=Path, default=None)
    return p


# ---- subcommands

def cmd_convergence(args) -> int:
    if max(args.n) > LARGE_N and not args.large:
        raise SystemExit(_usage_error(f"N > {LARGE_N} needs --large"))
    if args.quad_degree < 1:
        raise SystemExit(_usage_error("--quad-degree must be positive"))
    configs = list(CONFIGS) if args.config == "all" else [args.config]
    pairs = _pairs(args.pair)
    t0 = time.perf_counter()
    rows, slopes = run_convergence(configs, pairs, args.n, args.solver, args.quad_degree, args.params)
    args.out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = args.out / "convergence.csv", args.out / "slopes.json"
    write_csv(csv_path, CONVERGENCE_COLUMNS, ([getattr(r, c) for c in CONVERGENCE_COLUMNS] for r in rows))
    json_path.write_text(json.dumps(slopes, indent=2, sort_keys=True) + "\n")
    params = {p.value: asdict(StabilizationParams.defaults(p).replace(**args.params)) for p in pairs}
    _manifest(args, t0, [csv_path.name, json_path.name], {"stabilization": params})
    failed = [r for r in rows if r.status != "ok"]
    for r in rows:
        print(f"{r.config} {r.pair} N={r.N:<3d} h={r.h_max:.4f} H1(u)={r.err_u_H1:.4e} L2(p)={r.err_p_L2:.4e} {r.status}")
    for key, s in slopes.items():
        if "velocity_H1" in s:
            print(f"slope {key}: u {s['velocity_H1']:.3f}  p {s['pressure_L2']:.3f}")
    return 1 if failed else 0


def cmd_condition(args) -> int:
    t0 = time.perf_counter()
    rows = run_condition_sweep(args.l, args.beta, args.pair, args.method)
    args.out.mkdir(parents=True, exist_ok=True)
    header, body = condition_table(rows)
    wide, longf = args.out / "condition.csv", args.out / "condition_long.csv"
    write_csv(wide, header, body)
    write_csv(longf, CONDITION_LONG_COLUMNS, ([getattr(r, c) for c in CONDITION_LONG_COLUMNS] for r in rows))
    _manifest(args, t0, [wide.name, longf.name])
    for r in rows:
        flag = f" [{r.flag}]" if r.flag else ""
        print(f"{r.pair} l={r.l:.3f} beta={r.beta:<6g} kappa*h^2={r.kappa_scaled:.6g}{flag} {r.status}")
    return 1 if any(r.status != "ok" for r in rows) else 0


def cmd_patchtest(args) -> int:
    t0 = time.perf_counter()
    results = run_patch_tests(args.config, args.n, _pairs(args.pair), args.params)
    for r in results:
        err = "" if r.max_dof_error != r.max_dof_error else f" max dof error {r.max_dof_error:.3e}"
        reason = f" ({r.reason})" if r.reason else ""
        print(f"{r.status.upper():4s} {r.name} {r.pair} N={r.N}{err}{reason}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "patchtest.csv"
        cols = ["name", "pair", "N", "max_dof_error", "status", "reason"]
        write_csv(path, cols, ([getattr(r, c) for c in cols] for r in results))
        _manifest(args, t0, [path.name])
    return 1 if any(r.status == "fail" for r in results) else 0


def _manifest(args, t0: float, outputs: Sequence[str], extra: Optional[dict] = None) -> None:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    if extra:
        params.update(extra)
    RunManifest(
        subcommand=args.command,
        parameters=params,
        outputs=list(outputs),
        wall_clock_seconds=time.perf_counter() - t0,
        workers=int(os.environ.get("CUTSTOKES_WORKERS", "1")),
    ).write(args.out)


def _usage_error(msg: str) -> int:
    build_parser().print_usage(sys.stderr)
    print(f"cutstokes: error: {msg}", file=sys.stderr)
    return 2


COMMANDS = {"convergence": cmd_convergence, "condition": cmd_condition, "patchtest": cmd_patchtest}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
