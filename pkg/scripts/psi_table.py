#!/usr/bin/env python3
"""Print the zeros of the psi-based determinant next to i 2^n, and the circle maxima of |psi|."""

import argparse

from lacunary.experiments import psi_reproduction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--k-max", type=int, default=10)
    args = ap.parse_args()
    rep = psi_reproduction(n_max=args.n_max, k_max=args.k_max)
    print(" n        zero                                  rel. error")
    for n, (z, e) in enumerate(zip(rep.zeros, rep.expected), start=2):
        print(f"{n:2d}  {z.real:+.3e} {z.imag:+.15e}i  {abs(z - e) / abs(e):.1e}")
    print(f"first moment sum: {rep.first_moment.real:+.15f}")
    print("     r       max|psi|      r*max|psi|")
    for r, m in zip(rep.circle_radii, rep.circle_maxima):
        print(f"{r:8.0f}  {m:.6e}  {r * m:.6f}")
    print(f"fitted exponent {rep.decay_exponent:.4f}, constant {rep.decay_constant:.4f}")


if __name__ == "__main__":
    main()
