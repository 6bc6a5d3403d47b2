#!/usr/bin/env python3
"""Critical-exponent sweep for one matrix, with per-level estimates for stability checks.

    python scripts/run_sweep.py --matrix "2,0;0,4" --n-max 4 --out results/
"""

import argparse
import json
import time
from pathlib import Path

from combmod.confdim import DEFAULT_P_GRID, default_threads, dumps, estimate_Q, report, sweep
from combmod.geometry import IntMatrix2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--matrix", required=True)
    ap.add_argument("--n-max", type=int, default=4)
    ap.add_argument("--span", type=int, default=1, choices=(1, 2))
    ap.add_argument("--budget", type=int, default=None)
    ap.add_argument("--threads", type=int, default=default_threads())
    ap.add_argument("--p-grid", default=",".join(map(str, DEFAULT_P_GRID)))
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    A = IntMatrix2.parse(args.matrix)
    grid = tuple(float(x) for x in args.p_grid.split(","))
    t0 = time.perf_counter()
    table = sweep(A, p_grid=grid, n_max=args.n_max, threads=args.threads, budget=args.budget)
    elapsed = time.perf_counter() - t0

    per_level = {}
    for top in range(3, args.n_max + 1):
        est = estimate_Q(table, level=top, span=args.span)
        per_level[top] = est.Q_est
        print(f"top level {top}: Q_est={est.Q_est:.4f} bracket={est.bracket} "
              f"direction={est.direction}")
    est = estimate_Q(table, span=args.span)
    rec = report(A, est)
    print(f"{A.literal()}: Q_est={est.Q_est:.4f} oracle={rec['oracle']} gap={rec['gap']:.4f} "
          f"({elapsed:.1f}s, {len(table.flagged)} flagged)")
    for note in rec["notes"]:
        print(f"  note: {note}")

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        stem = "sweep_" + A.literal().replace(",", "_").replace(";", "__").replace("-", "m")
        (args.out / f"{stem}.csv").write_text(table.to_csv())
        (args.out / f"{stem}.json").write_text(
            dumps({"report": rec, "estimate": est.to_json(),
                   "per_level": {str(k): v for k, v in per_level.items()},
                   "seconds": round(elapsed, 1)}))
        print(f"wrote {args.out / stem}.csv and .json")


if __name__ == "__main__":
    main()
