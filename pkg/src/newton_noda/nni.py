"""Newton-Noda iteration for the positive ground state.

Each outer step solves the bordered Newton system at ``(u_k, lam_k)``,
moves to ``w = u_k + theta * delta``, normalises, and resets ``lam`` to the
Noda floor ``min(A(u) u / u)``.  ``theta`` starts at 1 and is halved until the
look-ahead residual ``h(theta) = r(u_{k+1}, lam_k)`` is positive, which makes
the eigenvalue estimates strictly increasing.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import (
    BorderedSolution,
    ConsistencyError,
    SingularMatrixError,
    certify_irreducible_m_matrix,
    certify_m_matrix,
    factorize,
    solve_bordered,
)
from .problem import (
    NaepProblem,
    PositivityError,
    apply_operator,
    discrete_energy,
    jacobian,
    lambda_floor,
    operator_norm_estimate,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "IterateState",
    "NewtonStep",
    "Status",
    "IterationRecord",
    "SolveTrace",
    "HalvingExhausted",
    "InvariantViolation",
    "TRACE_COLUMNS",
    "make_state",
    "initialize",
    "relative_residual",
    "try_step",
    "choose_theta",
    "newton_step",
    "eta_theta_bound",
    "solve",
]

# |h_i| at or below this multiple of ||A(u)u|| is rounding noise, not a sign
H_NOISE_RTOL = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 200
    max_halvings: int = 60
    check_invariants: bool = True
    record_trace: bool = True
    # (eta, M) for logging the analytic theta bound; never used to pick theta
    eta_diagnostic: Optional[tuple] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.max_halvings < 1:
            raise ValueError(f"max_halvings must be >= 1, got {self.max_halvings}")


@dataclass(frozen=True)
class IterateState:
    u: np.ndarray
    lam: float
    r: np.ndarray
    r_norm: float
    rel_residual: float
    k: int


@dataclass(frozen=True)
class NewtonStep:
    theta: float
    halvings: int
    delta_norm: float
    delta_lambda: float
    w_norm: float
    h_min_ratio: float
    u_next: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    HALVING_EXHAUSTED = "halving_exhausted"
    NUMERICAL_ERROR = "numerical_error"


class HalvingExhausted(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


TRACE_COLUMNS = (
    "k",
    "lambda",
    "r_norm",
    "rel_residual",
    "theta",
    "halvings",
    "min_u",
    "delta_norm",
    "delta_lambda",
    "energy",
)


@dataclass
class IterationRecord:
    """State ``k`` and the step taken from it (step fields are None on the last record)."""

    k: int
    lam: float
    r_norm: float
    rel_residual: float
    min_u: float
    energy: float
    theta: Optional[float] = None
    halvings: Optional[int] = None
    delta_norm: Optional[float] = None
    delta_lambda: Optional[float] = None
    # monitors, not serialised
    m_matrix_certified: Optional[bool] = None
    u_dot_delta: Optional[float] = None
    lemma1_slack: Optional[float] = None
    p_min: Optional[float] = None
    w_norm: Optional[float] = None
    h_min_ratio: Optional[float] = None
    lambda_update_error: Optional[float] = None
    eta_theta: Optional[float] = None

    def row(self) -> dict:
        return {
            "k": self.k,
            "lambda": self.lam,
            "r_norm": self.r_norm,
            "rel_residual": self.rel_residual,
            "theta": self.theta,
            "halvings": self.halvings,
            "min_u": self.min_u,
            "delta_norm": self.delta_norm,
            "delta_lambda": self.delta_lambda,
            "energy": self.energy,
        }


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    status: Optional[Status] = None
    detail: str = ""
    iterations: int = 0
    wall_time_seconds: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def steps(self) -> list:
        """Records that carry an accepted Newton step."""
        return [rec for rec in self.records if rec.theta is not None]


def relative_residual(prob: NaepProblem, state: IterateState) -> float:
    """``||r(u, lam)||_2 / sqrt(||A(u)||_1 ||A(u)||_inf)``."""
    return float(np.linalg.norm(state.r) / operator_norm_estimate(prob, state.u))


def make_state(prob: NaepProblem, u, lam: float, k: int) -> IterateState:
    Au = apply_operator(prob, u, u)
    r = Au - lam * u
    r_norm = float(np.linalg.norm(r))
    rel = r_norm / operator_norm_estimate(prob, u)
    return IterateState(u=u, lam=float(lam), r=r, r_norm=r_norm, rel_residual=rel, k=k)


def initialize(prob: NaepProblem, u0) -> IterateState:
    """Normalise a positive start vector and attach its Noda floor."""
    u0 = prob.check_vector(u0, "u0")
    if not np.all(u0 > 0):
        raise PositivityError("initial vector must be elementwise positive")
    u = u0 / np.linalg.norm(u0)
    return make_state(prob, u, lambda_floor(prob, u), 0)


def try_step(prob: NaepProblem, state: IterateState, sol: BorderedSolution, theta: float):
    """Candidate ``u_next = w/||w||`` with ``w = u + theta*delta``, and ``h = r(u_next, lam_k)``.

    Nothing in ``state`` is modified.
    """
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    w = state.u + theta * sol.delta
    if not np.all(w > 0):
        i = int(np.argmin(w))
        raise PositivityError(
            f"step lost positivity at theta={theta}: w[{i}] = {w[i]!r} (k={state.k})"
        )
    u_next = w / np.linalg.norm(w)
    h = apply_operator(prob, u_next, u_next) - state.lam * u_next
    return u_next, h


def choose_theta(
    prob: NaepProblem, state: IterateState, sol: BorderedSolution, max_halvings: int = 60
) -> NewtonStep:
    """Halving procedure: the largest ``theta = 2**-j`` with ``h(theta) > 0``."""
    delta_norm = float(np.linalg.norm(sol.delta))
    for j in range(max_halvings + 1):
        theta = 2.0**-j
        u_next, h = try_step(prob, state, sol, theta)
        noise = H_NOISE_RTOL * np.linalg.norm(h + state.lam * u_next)
        if np.all(h >= -noise):
            return NewtonStep(
                theta=theta,
                halvings=j,
                delta_norm=delta_norm,
                delta_lambda=sol.delta_lambda,
                w_norm=float(math.sqrt(1.0 + (theta * delta_norm) ** 2)),
                h_min_ratio=float(np.min(h / u_next)),
                u_next=u_next,
                h=h,
            )
    raise HalvingExhausted(
        f"no theta >= 2**-{max_halvings} gives a positive look-ahead residual at k={state.k}"
    )


def newton_step(prob: NaepProblem, state: IterateState, check_invariants: bool = True):
    """Factor J(u_k) and solve the bordered system. Returns ``(solution, certified)``.

    ``certified`` is the strict test ``J u_k > 0``.  When it fails (only
    possible for ``gamma == 0``) the step still proceeds if the weak
    irreducible certificate ``J u_k >= 0, != 0`` holds.
    """
    jac = jacobian(prob, state.u, state.lam)
    certified = None
    if check_invariants:
        certified = certify_m_matrix(jac.J, state.u)
        if not certified and not certify_irreducible_m_matrix(jac.J, state.u):
            raise InvariantViolation(f"J(u_k) is not certified as an M-matrix at k={state.k}")
    sol = solve_bordered(factorize(jac.J), state.u, state.r)
    if check_invariants and not np.all(sol.p > 0):
        raise InvariantViolation(f"J^-1 u has a nonpositive entry at k={state.k}")
    return sol, certified


def eta_theta_bound(step: NewtonStep, u, eta: float, M: float) -> float:
    """Analytic step bound ``eta*dl*min(u) / ((1+eta) M ||w|| ||delta||**2)``.

    ``M`` bounds the second-order remainder and has no practical formula, so
    this is a logged diagnostic only.
    """
    if step.delta_norm == 0:
        return math.inf
    w_norm = math.sqrt(1.0 + step.delta_norm**2)
    return eta * step.delta_lambda * float(np.min(u)) / ((1 + eta) * M * w_norm * step.delta_norm**2)


def _record(prob, state, sol=None, step=None, certified=None, lam_next=None, eta=None):
    rec = IterationRecord(
        k=state.k,
        lam=state.lam,
        r_norm=state.r_norm,
        rel_residual=state.rel_residual,
        min_u=float(np.min(state.u)),
        energy=discrete_energy(prob, state.u),
        m_matrix_certified=certified,
    )
    if sol is not None:
        rec.u_dot_delta = float(state.u @ sol.delta)
        rec.lemma1_slack = sol.lemma1_slack
        rec.p_min = float(np.min(sol.p))
        rec.delta_lambda = sol.delta_lambda
        rec.delta_norm = float(np.linalg.norm(sol.delta))
    if step is not None:
        rec.theta = step.theta
        rec.halvings = step.halvings
        rec.w_norm = step.w_norm
        rec.h_min_ratio = step.h_min_ratio
        rec.lambda_update_error = abs((lam_next - state.lam) - step.h_min_ratio)
        if eta is not None:
            rec.eta_theta = eta_theta_bound(step, state.u, *eta)
    return rec


def solve(prob: NaepProblem, u0=None, config: SolverConfig | None = None):
    """Run the Newton-Noda iteration from a positive ``u0``.

    ``u0`` defaults to the constant vector.  Returns ``(state, trace)``; the
    outcome is in ``trace.status`` and failed runs keep the partial trace.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    if u0 is None:
        u0 = np.ones(prob.n)
    state = initialize(prob, u0)
    trace = SolveTrace()

    def keep(rec):
        if config.record_trace:
            trace.records.append(rec)

    while True:
        if state.rel_residual <= config.tol:
            trace.status = Status.CONVERGED
            break
        if state.k >= config.max_iter:
            trace.status = Status.MAX_ITERATIONS
            trace.detail = f"rel_residual {state.rel_residual:.3e} after {state.k} iterations"
            break
        sol = None
        try:
            sol, certified = newton_step(prob, state, config.check_invariants)
            step = choose_theta(prob, state, sol, config.max_halvings)
            lam_next = lambda_floor(prob, step.u_next)
        except HalvingExhausted as exc:
            trace.status = Status.HALVING_EXHAUSTED
            trace.detail = str(exc)
            break
        except (SingularMatrixError, ConsistencyError, PositivityError, InvariantViolation) as exc:
            trace.status = Status.NUMERICAL_ERROR
            trace.detail = f"{type(exc).__name__}: {exc}"
            break
        keep(_record(prob, state, sol, step, certified, lam_next, config.eta_diagnostic))
        log.debug(
            "k=%d lambda=%.15g rel_res=%.3e theta=%g",
            state.k, state.lam, state.rel_residual, step.theta,
        )
        state = make_state(prob, step.u_next, lam_next, state.k + 1)

    certified = None
    if config.check_invariants:
        certified = certify_m_matrix(jacobian(prob, state.u, state.lam).J, state.u)
    final = _record(prob, state, sol if trace.status is not Status.CONVERGED else None,
                    certified=certified)
    if not config.record_trace:
        trace.records = []
    trace.records.append(final)
    trace.iterations = state.k
    trace.wall_time_seconds = time.perf_counter() - t0
    return state, trace
