#!/usr/bin/env python3
"""Block counts on t_n = n with and without the sandwich condition enforced.

For each window size prints, per policy, the number of blocks reached, the
anchors, the extreme sandwich products and the wall time.
"""

import argparse
import time

from lacunary.counterexample import build_counterexample
from lacunary.errors import InsufficientSparseness
from lacunary.spectra import integer_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 3000, 10_000])
    ap.add_argument("--max-blocks", type=int, default=6)
    args = ap.parse_args()
    print("size     policy   blocks  sandwich[min,max]      time  anchors")
    for n in args.sizes:
        seq = integer_sequence(n)
        for policy in ("report", "enforce"):
            t0 = time.perf_counter()
            try:
                b = build_counterexample(seq, args.max_blocks, sandwich=policy)
            except InsufficientSparseness as e:
                print(f"{n:<8d} {policy:8s} {e}")
                continue
            dt = time.perf_counter() - t0
            lo, hi = min(b.sandwich_min), max(b.sandwich_max)
            anchors = ", ".join(f"{a:g}" for a in b.anchor_values())
            print(f"{n:<8d} {policy:8s} {len(b.blocks):6d}  [{lo:.3f}, {hi:.3f}]  {dt:8.2f}s  {anchors}")


if __name__ == "__main__":
    main()
