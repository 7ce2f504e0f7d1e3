"""Iteration counts for n in {2500, 10000, 40000} under the three saturation regimes.

Runs every seed in ``--seeds`` and writes ``<outdir>/table1.csv`` with one
row per (seed, regime, n), then prints a regime-by-size summary.
"""

import argparse
from pathlib import Path

from newton_noda.experiments import A_MODES, run_table1, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--gamma", type=float, default=10.0)
    args = ap.parse_args()

    rows = []
    for seed in (int(s) for s in args.seeds.split(",")):
        rows += run_table1(seed=seed, gamma=args.gamma)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "table1.csv", "w", newline="") as fh:
        write_rows(rows, fh)

    sizes = sorted({r["n"] for r in rows})
    print(f"{'regime':<15}" + "".join(f"{n:>12}" for n in sizes))
    for mode in A_MODES:
        cells = []
        for n in sizes:
            its = [r["iterations"] for r in rows if r["a_mode"] == mode and r["n"] == n]
            cells.append(f"{min(its)}-{max(its)}" if min(its) != max(its) else str(its[0]))
        print(f"{mode:<15}" + "".join(f"{c:>12}" for c in cells))


if __name__ == "__main__":
    main()
