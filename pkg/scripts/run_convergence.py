#!/usr/bin/env python3
"""Convergence study on the unit cube for configurations A, B and C.

Writes convergence.csv, slopes.json and manifest.json to --out (default
runs/convergence).  Extra arguments go straight to ``cutstokes convergence``.

    python scripts/run_convergence.py --n 4,6,8,12
    CUTSTOKES_WORKERS=4 python scripts/run_convergence.py --config C --pair p1p0
"""

import sys

from cutstokes.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "runs/convergence"]
    sys.exit(main(["convergence", "--config", "all", "--pair", "both", *args]))
