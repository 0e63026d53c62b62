#!/usr/bin/env python3
"""Run every bundled scenario and print one status line per scenario."""

import argparse
import sys
import time

from lacunary.cli import bundled_scenarios, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out", help="parent directory for the per-scenario reports")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    worst = 0
    for name in bundled_scenarios():
        t0 = time.perf_counter()
        status = run_scenario(name, f"{args.out}/{name.removesuffix('.json')}", args.threads, 1.0, args.seed)
        print(f"{name:36s} exit {status}  {time.perf_counter() - t0:6.1f}s")
        worst = max(worst, status)
    return worst


if __name__ == "__main__":
    sys.exit(main())
