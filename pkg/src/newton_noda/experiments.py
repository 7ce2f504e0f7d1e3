"""Seeded problem generation, experiment runners and trace serialisation."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .linalg import read_matrix_market
from .nni import TRACE_COLUMNS, SolverConfig, SolveTrace, Status, solve
from .problem import NaepProblem, build_laplacian_1d, build_laplacian_2d

log = logging.getLogger(__name__)

__all__ = [
    "A_MODES",
    "A_FLOOR",
    "EXIT_CODES",
    "generate_a",
    "ExperimentConfig",
    "ExperimentResult",
    "build_problem",
    "run_experiment",
    "trace_to_csv",
    "trace_to_json",
    "write_trace",
    "run_gamma_sweep",
    "run_table1",
    "write_rows",
]

A_MODES = ("ge1", "unit_interval", "positive")
A_FLOOR = 1e-3

EXIT_CODES = {
    Status.CONVERGED: 0,
    Status.MAX_ITERATIONS: 2,
    Status.HALVING_EXHAUSTED: 3,
    Status.NUMERICAL_ERROR: 4,
}
EXIT_IO_ERROR = 5


def _normalize_mode(a_mode: str) -> str:
    mode = a_mode.replace("-", "_")
    if mode not in A_MODES:
        raise ValueError(f"unknown a_mode {a_mode!r}; expected one of {A_MODES}")
    return mode


def generate_a(n: int, a_mode: str, a_seed: int) -> np.ndarray:
    """Saturation vector for one of the three regimes.

    Uses numpy's PCG64 seeded through ``SeedSequence``, so a given
    ``(n, a_mode, a_seed)`` gives the same vector on every platform.

    * ``ge1``: ``1 + xi``
    * ``unit_interval``: ``A_FLOOR + (1 - A_FLOOR) * xi``, inside ``[1e-3, 1)``
    * ``positive``: ``2 * xi + A_FLOOR``

    with ``xi`` uniform on ``[0, 1)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    mode = _normalize_mode(a_mode)
    xi = np.random.Generator(np.random.PCG64(int(a_seed))).random(n)
    if mode == "ge1":
        return 1.0 + xi
    if mode == "unit_interval":
        return A_FLOOR + (1.0 - A_FLOOR) * xi
    return 2.0 * xi + A_FLOOR


@dataclass(frozen=True)
class ExperimentConfig:
    grid_dim: int = 2
    m: int = 10
    gamma: float = 10.0
    a_mode: str = "unit_interval"
    a_seed: int = 0
    scale_by_h2: bool = True
    tol: float = 1e-12
    max_iter: int = 200
    max_halvings: int = 60
    output_path: Optional[str] = None
    format: str = "csv"
    oracle_check: bool = False
    matrix_path: Optional[str] = None
    record_wall_time: bool = True

    def __post_init__(self):
        if self.grid_dim not in (1, 2):
            raise ValueError(f"grid_dim must be 1 or 2, got {self.grid_dim}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")
        if not 0 <= self.a_seed < 2**64:
            raise ValueError("a_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "a_mode", _normalize_mode(self.a_mode))

    @property
    def n(self) -> int:
        return self.m**self.grid_dim

    def solver_config(self) -> SolverConfig:
        return SolverConfig(tol=self.tol, max_iter=self.max_iter, max_halvings=self.max_halvings)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: SolveTrace
    lam: float
    u: np.ndarray = field(repr=False)
    oracle: dict = field(default_factory=dict)

    @property
    def status(self) -> Status:
        return self.trace.status

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.trace.status]


def build_problem(config: ExperimentConfig) -> NaepProblem:
    if config.matrix_path:
        A = read_matrix_market(config.matrix_path)
    elif config.grid_dim == 1:
        A = build_laplacian_1d(config.m, config.scale_by_h2)
    else:
        A = build_laplacian_2d(config.m, config.scale_by_h2)
    n = A.shape[0]
    if not config.matrix_path and n != config.n:
        raise AssertionError(f"matrix dimension {n} != m**grid_dim = {config.n}")
    return NaepProblem(A, generate_a(n, config.a_mode, config.a_seed), config.gamma)


def _oracle_reports(prob: NaepProblem) -> dict:
    from .linalg import factorize, solve_bordered
    from .nni import initialize
    from .problem import jacobian
    from .verify import DENSE_MAX_N, FD_MAX_N, compare, dense_bordered_oracle, fd_jacobian_check

    out = {}
    state = initialize(prob, np.ones(prob.n))
    if prob.n <= DENSE_MAX_N:
        sol = solve_bordered(factorize(jacobian(prob, state.u, state.lam).J), state.u, state.r)
        d_ref, dl_ref = dense_bordered_oracle(prob, state.u, state.lam)
        rep = compare(np.append(sol.delta, sol.delta_lambda), np.append(d_ref, dl_ref), 1e-11)
        out["bordered"] = {**asdict(rep), "passed": rep.passed}
    if prob.n <= FD_MAX_N:
        rep = fd_jacobian_check(prob, state.u, state.lam)
        out["fd_jacobian"] = {**asdict(rep), "passed": rep.passed}
    if not out:
        log.info("oracle check skipped: n = %d exceeds the dense limits", prob.n)
    return out


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Build the problem, solve from the constant start vector and (optionally) write the trace."""
    prob = build_problem(config)
    state, trace = solve(prob, np.ones(prob.n), config.solver_config())
    result = ExperimentResult(config=config, trace=trace, lam=state.lam, u=state.u)
    if config.oracle_check:
        result.oracle = _oracle_reports(prob)
    if write and config.output_path:
        write_trace(result, config.output_path, config.format)
    return result


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_csv(trace: SolveTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace.records:
        row = rec.row()
        writer.writerow([_cell(row[c]) for c in TRACE_COLUMNS])
    return buf.getvalue()


def _json_float(x):
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def trace_to_json(result: ExperimentResult) -> str:
    cfg = asdict(result.config)
    doc = {
        "config": cfg,
        "records": [
            {k: _json_float(v) for k, v in rec.row().items()} for rec in result.trace.records
        ],
        "status": result.trace.status.value,
        "wall_time_seconds": result.trace.wall_time_seconds
        if result.config.record_wall_time
        else None,
    }
    if result.trace.detail:
        doc["detail"] = result.trace.detail
    if result.oracle:
        doc["oracle"] = result.oracle
    return json.dumps(doc, indent=2) + "\n"


def write_trace(result: ExperimentResult, path, fmt: str = "csv"):
    text = trace_to_csv(result.trace) if fmt == "csv" else trace_to_json(result)
    Path(path).write_text(text)


def run_gamma_sweep(base: ExperimentConfig, gammas) -> list[dict]:
    """One solve per gamma on the same matrix and saturation vector; rows in input order."""
    gammas = list(gammas)
    if not gammas:
        raise ValueError("gamma sweep needs at least one value")
    rows = []
    for g in gammas:
        cfg = replace(base, gamma=float(g), output_path=None)
        try:
            res = run_experiment(cfg, write=False)
            rows.append(
                {
                    "gamma": float(g),
                    "iterations": res.trace.iterations,
                    "final_lambda": res.lam,
                    "final_rel_residual": res.trace.records[-1].rel_residual,
                    "status": res.status.value,
                }
            )
        except Exception as exc:  # a bad row must not stop the sweep
            log.exception("gamma=%g failed", g)
            rows.append(
                {
                    "gamma": float(g),
                    "iterations": None,
                    "final_lambda": None,
                    "final_rel_residual": None,
                    "status": f"error: {exc}",
                }
            )
    return rows


TABLE1_SIDES = (50, 100, 200)


def run_table1(seed: int = 0, gamma: float = 10.0, sides=TABLE1_SIDES, scale_by_h2: bool = True,
               tol: float = 1e-12) -> list[dict]:
    """All ``n in {2500, 10000, 40000}`` x ``a_mode`` rows, grouped by mode like the published table."""
    rows = []
    for mode in A_MODES:
        for m in sides:
            cfg = ExperimentConfig(
                grid_dim=2, m=m, gamma=gamma, a_mode=mode, a_seed=seed,
                scale_by_h2=scale_by_h2, tol=tol,
            )
            res = run_experiment(cfg, write=False)
            rows.append(
                {
                    "n": cfg.n,
                    "a_mode": mode,
                    "seed": seed,
                    "iterations": res.trace.iterations,
                    "final_rel_residual": res.trace.records[-1].rel_residual,
                    "halvings": sum(r.halvings for r in res.trace.steps),
                    "status": res.status.value,
                }
            )
    return rows


def write_rows(rows: list[dict], stream, fmt: str = "csv"):
    if fmt == "json":
        json.dump(rows, stream, indent=2)
        stream.write("\n")
        return
    if not rows:
        return
    writer = csv.DictWriter(stream, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
