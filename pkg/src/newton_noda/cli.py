"""Command line entry point: ``newton-noda {solve,gamma-sweep,table1}``.

Exit codes: 0 converged, 2 max iterations, 3 halving exhausted,
4 numerical error, 5 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import (
    A_MODES,
    EXIT_CODES,
    EXIT_IO_ERROR,
    ExperimentConfig,
    run_experiment,
    run_gamma_sweep,
    run_table1,
    trace_to_csv,
    trace_to_json,
    write_rows,
)
from .linalg import write_matrix_market
from .nni import Status

log = logging.getLogger("newton_noda")


class _Parser(argparse.ArgumentParser):
    # argparse's default exit status 2 collides with MaxIterations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO_ERROR, f"{self.prog}: error: {message}\n")


def _uint64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--grid-dim", type=int, choices=(1, 2), default=2)
    p.add_argument("--m", type=int, default=10, help="grid side; n = m**grid_dim")
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--a-mode", choices=[m.replace("_", "-") for m in A_MODES], default="unit-interval")
    p.add_argument("--a-seed", type=_uint64, default=0)
    p.add_argument(
        "--scale-by-h2",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="multiply the stencil by 1/h**2, h = 1/(m+1) (default: on)",
    )
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--max-halvings", type=int, default=60)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--oracle-check", action="store_true")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="newton-noda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="solve one problem and write its trace")
    p.add_argument("--matrix", default=None, help="MatrixMarket file to use instead of a Laplacian")
    p.add_argument("--export-matrix", default=None, help="write the stiffness matrix as MatrixMarket")
    p.add_argument("--no-wall-time", action="store_true", help="write null wall time (byte-stable JSON)")

    p = sub.add_parser("gamma-sweep", parents=[common], help="iteration count versus gamma")
    p.add_argument("--gammas", default="1,10,100,1000", help="comma-separated gamma values")

    p = sub.add_parser("table1", parents=[common], help="the 3 sizes x 3 a-regimes table")
    p.add_argument("--seed", type=_uint64, default=0)
    p.add_argument("--sides", default="50,100,200", help="comma-separated grid sides")
    return parser


def _config(args, **extra) -> ExperimentConfig:
    kwargs = dict(
        grid_dim=args.grid_dim,
        m=args.m,
        gamma=args.gamma,
        a_mode=args.a_mode,
        a_seed=args.a_seed,
        scale_by_h2=args.scale_by_h2,
        tol=args.tol,
        max_iter=args.max_iter,
        max_halvings=args.max_halvings,
        output_path=args.out,
        format=args.format,
        oracle_check=args.oracle_check,
    )
    kwargs.update(extra)
    return ExperimentConfig(**kwargs)


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args):
    cfg = _config(args, matrix_path=args.matrix, record_wall_time=not args.no_wall_time)
    res = run_experiment(cfg, write=False)
    text = trace_to_csv(res.trace) if cfg.format == "csv" else trace_to_json(res)
    _emit(text, args.out)
    if args.export_matrix:
        from .experiments import build_problem

        write_matrix_market(args.export_matrix, build_problem(cfg).A)
    if res.oracle and cfg.format == "csv":
        print(json.dumps(res.oracle), file=sys.stderr)
    log.info("%s after %d iterations, lambda = %.15g", res.status.value, res.trace.iterations, res.lam)
    if res.trace.detail:
        log.warning("%s", res.trace.detail)
    return res.exit_code


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _worst(statuses):
    codes = []
    for s in statuses:
        try:
            codes.append(EXIT_CODES[Status(s)])
        except ValueError:
            codes.append(EXIT_CODES[Status.NUMERICAL_ERROR])
    return max(codes, default=0)


def _cmd_sweep(args):
    rows = run_gamma_sweep(_config(args, output_path=None), _floats(args.gammas))
    _write_table(rows, args)
    return _worst(r["status"] for r in rows)


def _cmd_table1(args):
    sides = [int(x) for x in args.sides.split(",") if x.strip()]
    rows = run_table1(seed=args.seed, gamma=args.gamma, sides=sides,
                      scale_by_h2=args.scale_by_h2, tol=args.tol)
    _write_table(rows, args)
    return _worst(r["status"] for r in rows)


def _write_table(rows, args):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_rows(rows, fh, args.format)
    else:
        write_rows(rows, sys.stdout, args.format)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"solve": _cmd_solve, "gamma-sweep": _cmd_sweep, "table1": _cmd_table1}[args.command]
    try:
        return handler(args)
    except OSError as exc:
        print(f"newton-noda: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    except ValueError as exc:
        print(f"newton-noda: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
