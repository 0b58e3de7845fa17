#!/usr/bin/env python3
"""Compare the compiled and numpy simulation kernels.

Run directly or via `pipescale bench`.  Forcing PIPESCALE_PURE=1 makes the
package run on the numpy lane end to end; this script always times both.
"""

import argparse

from pipescale.simkernel.bench import run_bench

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=20000)
    args = parser.parse_args()
    run_bench(runs=args.runs)
