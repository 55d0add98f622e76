#!/usr/bin/env python3
"""Linear patch tests: the scheme must reproduce linear Stokes solutions exactly.

    python scripts/run_patchtest.py            # config B, N = 2 and 4, both pairs
    python scripts/run_patchtest.py --config C --n 8
"""

import sys

from cutstokes.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--n" not in args:
        args += ["--n", "2,4"]
    sys.exit(main(["patchtest", *args]))
