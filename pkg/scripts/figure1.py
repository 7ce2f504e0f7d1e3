"""Relative residual per iteration on the 10x10 grid (n=100, gamma=10, 0 < a < 1).

Writes ``<outdir>/figure1_trace.csv`` and prints the residual history.
"""

import argparse
from pathlib import Path

from newton_noda.experiments import ExperimentConfig, run_experiment, write_trace


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--a-seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig(m=10, gamma=10.0, a_mode="unit_interval", a_seed=args.a_seed)
    res = run_experiment(cfg, write=False)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(res, out / "figure1_trace.csv")

    for rec in res.trace.records:
        theta = "" if rec.theta is None else f"theta={rec.theta:g}"
        print(f"k={rec.k:2d}  lambda={rec.lam:.15g}  rel_residual={rec.rel_residual:.3e}  {theta}")
    print(f"{res.status.value} after {res.trace.iterations} iterations -> {out / 'figure1_trace.csv'}")


if __name__ == "__main__":
    main()
