#!/usr/bin/env python3
"""Dimension-comparison bound on refining grids.

For each k x k grid the left-right moduli at p and q are solved, the point-family bound
is maximized over pieces, and the comparison bound is evaluated on a range of eps values.
Prints one CSV row per (k, eps).
"""

import argparse
import csv
import sys

from combmod.cover import grid_cover
from combmod.curves import Connector, realize
from combmod.modulus import comb_dim_eps, dim_compare_bound, point_family_bound, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,8,12,16")
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--delta", type=float, default=1.0)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["k", "mod_p", "mod_q", "sup_eta", "eps", "bound", "holds"])
    for k in map(int, args.sizes.split(",")):
        c = grid_cover(k, k)
        fam = realize(Connector("left", "right"), c)
        mp, mq = solve(fam, args.p), solve(fam, args.q)
        sup = max(point_family_bound(c, s, args.delta, args.q).eta for s in range(c.n_pieces))
        for eps in (0.1, 0.25, 0.5, comb_dim_eps(sup, args.p)):
            b = dim_compare_bound(mp.upper_bound, sup, args.p, args.q, eps)
            w.writerow([k, repr(mp.value), repr(mq.value), repr(sup), repr(eps), repr(b),
                        mq.lower_bound <= b])


if __name__ == "__main__":
    main()
