"""Independent oracles and trace monitors.

The dense oracles here deliberately avoid the sparse code path: the bordered
system and the Jacobian are assembled from scratch in dense arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .nni import SolveTrace
from .problem import NaepProblem, residual

__all__ = [
    "OracleReport",
    "compare",
    "dense_operator",
    "dense_jacobian",
    "dense_bordered_oracle",
    "fd_jacobian_check",
    "validate_trace",
    "convergence_order_estimate",
    "monitor_summary",
    "random_m_matrix",
    "random_problem",
    "random_positive_unit",
]

DENSE_MAX_N = 512
FD_MAX_N = 200


@dataclass(frozen=True)
class OracleReport:
    max_abs_error: float
    max_rel_error: float
    location: int | None
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def compare(x, ref, tolerance: float) -> OracleReport:
    """Normwise comparison: ``max|x - ref| / max|ref|``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ref = np.atleast_1d(np.asarray(ref, dtype=float))
    err = np.abs(x - ref)
    i = int(np.argmax(err))
    scale = float(np.max(np.abs(ref)))
    rel = float(err[i]) / scale if scale > 0 else float(err[i])
    return OracleReport(float(err[i]), rel, i, tolerance)


def dense_operator(prob: NaepProblem, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return prob.A.toarray() + np.diag(prob.gamma * (1.0 - 1.0 / (prob.a + u**2)))


def dense_jacobian(prob: NaepProblem, u, lam) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = prob.n
    corr = (prob.a - u**2) / (prob.a + u**2) ** 2
    return prob.A.toarray() + (prob.gamma - lam) * np.eye(n) - prob.gamma * np.diag(corr)


def dense_bordered_oracle(prob: NaepProblem, u, lam):
    """Solve the full ``(n+1)``-dimensional Newton system by dense LU with partial pivoting.

    Returns ``(delta, delta_lambda)``.
    """
    n = prob.n
    if n > DENSE_MAX_N:
        raise ValueError(f"dense oracle limited to n <= {DENSE_MAX_N}, got {n}")
    u = np.asarray(u, dtype=float)
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = dense_jacobian(prob, u, lam)
    K[:n, n] = -u
    K[n, :n] = -u
    r = dense_operator(prob, u) @ u - lam * u
    rhs = np.concatenate([-r, [-0.5 * (u @ u - 1.0)]])
    lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    if np.any(np.diag(lu) == 0):
        raise np.linalg.LinAlgError("dense bordered matrix is singular")
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    return x[:n], float(x[n])


def fd_jacobian_check(prob: NaepProblem, u, lam, tolerance: float = 1e-5) -> OracleReport:
    """Compare ``jacobian`` against central differences of ``residual``, column by column.

    Step ``1e-6 * (1 + |u_i|)``.  Per-column relative error is scaled by the
    largest entry of the analytic column.
    """
    from .problem import jacobian

    n = prob.n
    if n > FD_MAX_N:
        raise ValueError(f"finite-difference check limited to n <= {FD_MAX_N}, got {n}")
    u = np.asarray(u, dtype=float)
    J = jacobian(prob, u, lam).J.toarray()
    worst_abs, worst_rel, where = 0.0, 0.0, None
    for i in range(n):
        h = 1e-6 * (1.0 + abs(u[i]))
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        col = (residual(prob, up, lam) - residual(prob, um, lam)) / (up[i] - um[i])
        err = float(np.max(np.abs(col - J[:, i])))
        rel = err / max(float(np.max(np.abs(J[:, i]))), np.finfo(float).tiny)
        worst_abs = max(worst_abs, err)
        if where is None or rel > worst_rel:
            worst_rel, where = rel, i
    return OracleReport(worst_abs, worst_rel, where, tolerance)


def validate_trace(prob: NaepProblem, trace: SolveTrace) -> OracleReport:
    """Post-hoc checks on a trace; failures are reported, never raised.

    Checked per record: ``min_u > 0``, ``lambda`` below the a-priori bound,
    ``theta`` in (0, 1] and equal to ``2**-halvings``, and ``lambda`` strictly
    increasing.  The step into the last record of a converged run only has
    to be nondecreasing up to rounding.
    """
    bound = prob.norm_bound()
    recs = trace.records
    problems = []
    for i, rec in enumerate(recs):
        if not rec.min_u > 0:
            problems.append((i, f"min_u = {rec.min_u!r}"))
        if not rec.lam <= bound:
            problems.append((i, f"lambda {rec.lam!r} exceeds bound {bound!r}"))
        if rec.theta is not None:
            if not 0 < rec.theta <= 1:
                problems.append((i, f"theta {rec.theta!r} outside (0, 1]"))
            elif rec.halvings is None or rec.theta != 2.0 ** -rec.halvings:
                problems.append((i, f"theta {rec.theta!r} != 2**-{rec.halvings}"))
        if i > 0:
            prev = recs[i - 1].lam
            last_converged = trace.converged and i == len(recs) - 1
            slack = 1e-13 * max(abs(prev), abs(rec.lam), 1.0) if last_converged else 0.0
            if not rec.lam - prev > -slack or (not last_converged and rec.lam == prev):
                problems.append((i, f"lambda did not increase: {prev!r} -> {rec.lam!r}"))
    if not problems:
        return OracleReport(0.0, 0.0, None, 0.0, "ok")
    where = problems[0][0]
    detail = "; ".join(f"record {i}: {msg}" for i, msg in problems)
    return OracleReport(1.0, 1.0, where, 0.0, detail)


def convergence_order_estimate(trace, window: int = 3, min_iterations: int = 5):
    """Least-squares slope of ``log r_{k+1}`` against ``log r_k`` at the end of a run.

    ``trace`` is a :class:`SolveTrace` or a plain residual sequence.  Only the
    strictly decreasing tail above ``100 * eps`` is used, and at most the last
    ``window`` pairs.  Returns None when fewer than two pairs are usable or the
    run is shorter than ``min_iterations``.
    """
    if isinstance(trace, SolveTrace):
        res = [rec.rel_residual for rec in trace.records]
    else:
        res = list(trace)
    if len(res) - 1 < min_iterations:
        return None
    floor = 100 * np.finfo(float).eps
    usable = [x for x in res if x > floor]
    # strictly decreasing tail
    tail = usable[-1:]
    for x in reversed(usable[:-1]):
        if x > tail[0]:
            tail.insert(0, x)
        else:
            break
    if len(tail) < 3:
        return None
    logs = np.log(tail[-(window + 1):])
    x, y = logs[:-1], logs[1:]
    slope = np.polyfit(x, y, 1)[0]
    return float(slope) if math.isfinite(slope) else None


def monitor_summary(prob: NaepProblem, trace: SolveTrace) -> dict:
    """Worst-case values of the per-iteration monitors recorded by the solver."""
    steps = trace.steps
    recs = trace.records
    update_errs = []
    for rec, nxt in zip(recs[:-1], recs[1:]):
        if rec.lambda_update_error is not None:
            update_errs.append(rec.lambda_update_error / max(abs(rec.lam), abs(nxt.lam), np.finfo(float).tiny))
    return {
        "min_u": min(rec.min_u for rec in recs),
        "all_m_matrix": all(rec.m_matrix_certified is not False for rec in recs)
        and all(rec.m_matrix_certified is not None for rec in recs),
        "max_u_dot_delta": max((abs(r.u_dot_delta) for r in steps), default=0.0),
        "min_delta_lambda": min((r.delta_lambda for r in steps), default=0.0),
        "max_lambda_update_rel": max(update_errs, default=0.0),
        "min_lemma1_slack": min((r.lemma1_slack for r in steps), default=0.0),
        "min_p": min((r.p_min for r in steps), default=math.inf),
        "max_lambda": max(rec.lam for rec in recs),
        "lambda_bound": prob.norm_bound(),
        "halvings": [r.halvings for r in steps],
    }


def random_m_matrix(rng, n: int, density: float = 0.1, symmetric: bool = False) -> sp.csr_array:
    """Random irreducible, strictly diagonally dominant Z-matrix (hence a nonsingular M-matrix).

    A path ``0 - 1 - ... - n-1`` in both directions guarantees irreducibility.
    """
    rows = list(range(n - 1)) + list(range(1, n))
    cols = list(range(1, n)) + list(range(n - 1))
    extra = rng.random((n, n)) < density
    np.fill_diagonal(extra, False)
    er, ec = np.nonzero(extra)
    rows += er.tolist()
    cols += ec.tolist()
    off = sp.coo_array(
        (-rng.uniform(0.1, 1.0, len(rows)), (rows, cols)), shape=(n, n)
    ).tocsr()
    off.sum_duplicates()
    if symmetric:
        off = (off + off.T) * 0.5
    dominance = np.asarray(abs(off).sum(axis=1)).ravel()
    diag = dominance + rng.uniform(0.05, 1.0, n)
    return (off + sp.diags_array(diag)).tocsr()


def random_problem(rng, n: int, a_mode: str = "ge1", gamma: float = 1.0, kind: str = "random"):
    """Random problem for property tests and oracle sweeps.

    ``kind`` is ``random`` (unsymmetric M-matrix), ``symmetric`` or ``laplacian``
    (1D stencil of size ``n``).
    """
    from .experiments import generate_a

    if kind == "laplacian":
        from .problem import build_laplacian_1d

        A = build_laplacian_1d(n)
    else:
        A = random_m_matrix(rng, n, symmetric=(kind == "symmetric"))
    seed = int(rng.integers(0, 2**63))
    return NaepProblem(A, generate_a(n, a_mode, seed), gamma)


def random_positive_unit(rng, n: int) -> np.ndarray:
    u = rng.uniform(0.1, 1.0, n)
    return u / np.linalg.norm(u)
