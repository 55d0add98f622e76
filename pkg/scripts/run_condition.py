#!/usr/bin/env python3
"""Scaled condition numbers of the box-in-box problem for both element pairs.

Produces one directory per pair under --out (default runs/condition), each
holding the wide table condition.csv, condition_long.csv and a manifest.
The full grid (4 l values x 8 beta values) takes tens of minutes per pair.

    python scripts/run_condition.py
    python scripts/run_condition.py --beta 0,0.025,1 --method dense
"""

import argparse
import os
import sys

from cutstokes.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/condition")
    ap.add_argument("--pairs", default="p1p1,p1p0")
    known, rest = ap.parse_known_args()
    status = 0
    for pair in known.pairs.split(","):
        out = os.path.join(known.out, pair)
        status = max(status, main(["condition", "--pair", pair, "--out", out, *rest]))
    sys.exit(status)
