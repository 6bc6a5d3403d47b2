#!/usr/bin/env python3
"""Ahlfors ratio spread of the parabolic metric for a range of trial exponents.

The spread stays bounded only at Q = 1 + 1/alpha; elsewhere it grows with the radius range.
"""

import argparse

from combmod.geometry import ParabolicMetric, ahlfors_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--kmin", type=int, default=2)
    ap.add_argument("--kmax", type=int, nargs="+", default=[6, 7, 8])
    args = ap.parse_args()

    m = ParabolicMetric(args.alpha)
    target = 1 + 1 / args.alpha
    print(f"alpha={args.alpha} expected Q={target:g}")
    print("Q      " + "  ".join(f"r<=2^-{k:<2d}" for k in args.kmax))
    for Q in (target - 1, target - 0.5, target, target + 0.5, target + 1):
        spreads = [ahlfors_estimate(m, Q, [2.0**-j for j in range(args.kmin, k + 1)]).spread
                   for k in args.kmax]
        print(f"{Q:<6.2f} " + "  ".join(f"{s:9.3f}" for s in spreads))


if __name__ == "__main__":
    main()
