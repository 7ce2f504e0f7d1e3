"""Saturable nonlinear eigenvalue problem on a sparse M-matrix.

The problem is ``A u + gamma * diag(1 - 1/(a + u**2)) u = lam u`` with
``||u|| = 1``.  ``A`` is an irreducible nonsingular M-matrix (typically a
finite-difference Laplacian), ``a > 0`` holds the saturation parameters and
``gamma`` is the coupling strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import as_csr, validate_irreducible, validate_z_pattern

__all__ = [
    "DimensionError",
    "PositivityError",
    "NaepProblem",
    "nonlinear_diagonal",
    "apply_operator",
    "residual",
    "lambda_floor",
    "JacobianMatrix",
    "jacobian",
    "jacobian_correction",
    "operator_norm_estimate",
    "build_laplacian_1d",
    "build_laplacian_2d",
    "discrete_energy",
]


class DimensionError(ValueError):
    """Vector length does not match the problem size."""


class PositivityError(ValueError):
    """A vector that must be strictly positive is not."""


@dataclass(frozen=True, eq=False)
class NaepProblem:
    """Immutable problem instance ``(A, a, gamma)``.

    Construction validates the Z-pattern and irreducibility of ``A`` once;
    nothing downstream re-checks them.  ``gamma = 0`` is accepted and gives
    the linear eigenproblem for ``A``.
    """

    A: sp.csr_array
    a: np.ndarray
    gamma: float
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = as_csr(self.A)
        a = np.array(self.a, dtype=float).ravel()
        gamma = float(self.gamma)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if a.shape[0] != A.shape[0]:
            raise DimensionError(f"a has length {a.shape[0]}, A is {A.shape[0]}x{A.shape[0]}")
        if not np.all(a > 0):
            raise ValueError("every saturation parameter a_i must be > 0")
        if not (gamma >= 0 and np.isfinite(gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {gamma}")
        if self.validate:
            if not validate_z_pattern(A):
                raise ValueError("A has a positive off-diagonal entry (not a Z-matrix)")
            if not validate_irreducible(A):
                raise ValueError("A is reducible")
        a.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", gamma)

        diag = A.diagonal()
        absA = abs(A)
        # |A| row/column sums without the diagonal, reused by the norm estimate
        off_row = np.asarray(absA.sum(axis=1)).ravel() - np.abs(diag)
        off_col = np.asarray(absA.sum(axis=0)).ravel() - np.abs(diag)
        for arr in (diag, off_row, off_col):
            arr.setflags(write=False)
        object.__setattr__(self, "_diag", diag)
        object.__setattr__(self, "_off_row", off_row)
        object.__setattr__(self, "_off_col", off_col)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def check_vector(self, v, name="u") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionError(f"{name} has shape {v.shape}, expected ({self.n},)")
        return v

    def norm_bound(self) -> float:
        """``sqrt(||A||_1 ||A||_inf) + (1 + n) gamma``, an upper bound for every lambda_k."""
        norm1 = np.max(self._off_col + np.abs(self._diag))
        norm_inf = np.max(self._off_row + np.abs(self._diag))
        return float(np.sqrt(norm1 * norm_inf) + (1 + self.n) * self.gamma)


def nonlinear_diagonal(prob: NaepProblem, u) -> np.ndarray:
    """Diagonal ``gamma * (1 - 1/(a + u**2))`` of the nonlinear term."""
    u = prob.check_vector(u)
    return prob.gamma * (1.0 - 1.0 / (prob.a + u * u))


def apply_operator(prob: NaepProblem, u, v) -> np.ndarray:
    """``(A + diag(nonlinear_diagonal(u))) @ v``."""
    d = nonlinear_diagonal(prob, u)
    v = prob.check_vector(v, "v")
    return prob.A @ v + d * v


def residual(prob: NaepProblem, u, lam: float) -> np.ndarray:
    u = prob.check_vector(u)
    return apply_operator(prob, u, u) - lam * u


def _require_positive(u, name="u"):
    if not np.all(u > 0):
        i = int(np.argmin(u))
        raise PositivityError(f"{name} must be elementwise positive; {name}[{i}] = {u[i]!r}")


def lambda_floor(prob: NaepProblem, u) -> float:
    """Smallest componentwise ratio ``(A(u) u)_i / u_i`` (the Noda lower bound).

    Raises :class:`PositivityError` if any component of ``u`` is <= 0.
    """
    u = prob.check_vector(u)
    _require_positive(u)
    return float(np.min(apply_operator(prob, u, u) / u))


def operator_norm_estimate(prob: NaepProblem, u) -> float:
    """``sqrt(||A(u)||_1 ||A(u)||_inf)``, the cheap 2-norm estimate used for scaling residuals."""
    d = nonlinear_diagonal(prob, u)
    diag = np.abs(prob._diag + d)
    norm1 = np.max(prob._off_col + diag)
    norm_inf = np.max(prob._off_row + diag)
    return float(np.sqrt(norm1 * norm_inf))


def jacobian_correction(prob: NaepProblem, u) -> np.ndarray:
    """``2 gamma u**2 / (a + u**2)**2``: the diagonal by which J(u) exceeds A(u) - lam I."""
    u = prob.check_vector(u)
    s = prob.a + u * u
    return 2.0 * prob.gamma * u * u / (s * s)


@dataclass(frozen=True)
class JacobianMatrix:
    J: sp.csr_array
    lambda_used: float


def jacobian(prob: NaepProblem, u, lam: float) -> JacobianMatrix:
    """Derivative of ``residual(., lam)`` at ``u``.

    ``J = A + (gamma - lam) I - gamma diag((a - u**2) / (a + u**2)**2)``.
    Only the diagonal differs from ``A``.
    """
    u = prob.check_vector(u)
    s = prob.a + u * u
    dj = prob.gamma - lam - prob.gamma * (prob.a - u * u) / (s * s)
    J = (prob.A + sp.diags_array(dj, format="csr")).tocsr()
    J.sum_duplicates()
    J.sort_indices()
    return JacobianMatrix(J=J, lambda_used=float(lam))


def _check_grid(m):
    if int(m) != m or m < 2:
        raise ValueError(f"grid size m must be an integer >= 2, got {m!r}")
    return int(m)


def build_laplacian_1d(m: int, scale_by_h2: bool = False) -> sp.csr_array:
    """Tridiagonal ``(-1, 2, -1)`` Dirichlet Laplacian on ``m`` interior points."""
    m = _check_grid(m)
    e = np.ones(m - 1)
    L = sp.diags_array([-e, 2.0 * np.ones(m), -e], offsets=[-1, 0, 1], format="csr")
    if scale_by_h2:
        L = L * float((m + 1) ** 2)
    return as_csr(L)


def build_laplacian_2d(m: int, scale_by_h2: bool = False) -> sp.csr_array:
    """Five-point Dirichlet Laplacian on an ``m x m`` interior grid of the unit square.

    Unknowns are ordered row-major, so ``n = m**2`` and grid point ``(i, j)``
    has index ``i*m + j``.
    """
    m = _check_grid(m)
    T = build_laplacian_1d(m)
    eye = sp.eye_array(m, format="csr")
    L = sp.kron(eye, T) + sp.kron(T, eye)
    if scale_by_h2:
        L = L * float((m + 1) ** 2)
    return as_csr(L)


def discrete_energy(prob: NaepProblem, u) -> float:
    """Algebraic analogue of the continuous energy functional:
    ``u^T A u + gamma * sum(u**2 - log(1 + u**2/a))``."""
    u = prob.check_vector(u)
    u2 = u * u
    return float(u @ (prob.A @ u) + prob.gamma * np.sum(u2 - np.log1p(u2 / prob.a)))
