"""Iteration count against gamma on the 50x50 grid with a >= 1.

Writes ``<outdir>/figure2_gamma_sweep.csv``.
"""

import argparse
from pathlib import Path

from newton_noda.experiments import ExperimentConfig, run_gamma_sweep, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--gammas", default="1,10,100,1000")
    args = ap.parse_args()

    gammas = [float(g) for g in args.gammas.split(",")]
    rows = run_gamma_sweep(ExperimentConfig(m=args.m, a_mode="ge1"), gammas)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "figure2_gamma_sweep.csv", "w", newline="") as fh:
        write_rows(rows, fh)
    for row in rows:
        print(f"gamma={row['gamma']:<7g} iterations={row['iterations']}  status={row['status']}")


if __name__ == "__main__":
    main()
