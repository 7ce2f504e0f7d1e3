"""Sparse matrix plumbing: CSR canonicalisation, M-matrix structure checks,
sparse factorisation and the bordered Newton solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

__all__ = [
    "SingularMatrixError",
    "StructureError",
    "ConsistencyError",
    "as_csr",
    "validate_z_pattern",
    "validate_irreducible",
    "certify_m_matrix",
    "certify_irreducible_m_matrix",
    "Factorization",
    "factorize",
    "BorderedSolution",
    "solve_bordered",
    "read_matrix_market",
    "write_matrix_market",
]

# pivot |U_jj| below this fraction of the largest |M_ij| in column j counts as singular
PIVOT_RTOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class StructureError(ValueError):
    """Matrix lacks a required sign/sparsity structure."""


class ConsistencyError(RuntimeError):
    """An M-matrix guarantee failed numerically; points to an upstream bug."""


def as_csr(M) -> sp.csr_array:
    """Return ``M`` as a float CSR array with sorted, duplicate-free indices."""
    if sp.issparse(M):
        M = sp.csr_array(M, dtype=float, copy=True)
    else:
        M = sp.csr_array(np.atleast_2d(np.asarray(M, dtype=float)))
    M.sum_duplicates()
    M.sort_indices()
    return M


def _square(M):
    M = as_csr(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    return M


def _offdiag(M):
    coo = M.tocoo()
    keep = coo.row != coo.col
    return coo.row[keep], coo.col[keep], coo.data[keep]


def validate_z_pattern(M) -> bool:
    """True iff every stored off-diagonal value is <= 0."""
    M = _square(M)
    _, _, vals = _offdiag(M)
    return bool(np.all(vals <= 0))


def validate_irreducible(M) -> bool:
    """True iff the directed graph of nonzero off-diagonal entries is strongly connected."""
    M = _square(M)
    n = M.shape[0]
    if n == 1:
        return True
    rows, cols, vals = _offdiag(M)
    nz = vals != 0
    G = sp.csr_array((np.ones(nz.sum()), (rows[nz], cols[nz])), shape=(n, n))
    ncomp, _ = connected_components(G, directed=True, connection="strong")
    return ncomp == 1


def certify_m_matrix(M, v) -> bool:
    """Check ``M @ v > 0`` for a positive ``v``.

    For an irreducible Z-matrix this certifies a nonsingular M-matrix.
    """
    M = _square(M)
    v = np.asarray(v, dtype=float)
    if not validate_z_pattern(M):
        raise StructureError("matrix is not a Z-matrix")
    if v.shape != (M.shape[0],) or not np.all(v > 0):
        raise ValueError("certificate vector must be elementwise positive with matching length")
    return bool(np.all(M @ v > 0))


def certify_irreducible_m_matrix(M, v, rtol: float = 1e-14) -> bool:
    """Weak certificate: ``M`` irreducible Z-matrix, ``M @ v >= 0`` and not identically zero.

    This covers ``J(u) u = r(u, lam) >= 0`` in the linear case, where the strict
    test fails on the rows attaining the Noda floor.  Entries within
    ``rtol * (|M| @ v)_i`` of zero count as zero.
    """
    M = _square(M)
    v = np.asarray(v, dtype=float)
    if not validate_z_pattern(M):
        raise StructureError("matrix is not a Z-matrix")
    if v.shape != (M.shape[0],) or not np.all(v > 0):
        raise ValueError("certificate vector must be elementwise positive with matching length")
    Mv = M @ v
    noise = rtol * (abs(M) @ v)
    return bool(np.all(Mv >= -noise) and np.any(Mv > noise) and validate_irreducible(M))


class Factorization:
    """Sparse LU of a square matrix, reusable for many right-hand sides.

    Symmetric input with a positive diagonal takes SuperLU's symmetric mode
    (minimum degree on ``A + A^T``, diagonal pivots), the Cholesky-like path.
    Anything else gets COLAMD with threshold partial pivoting.
    """

    def __init__(self, M):
        M = _square(M)
        self.n = M.shape[0]
        diag = M.diagonal()
        self.symmetric = bool(np.all(diag > 0) and (M != M.T).nnz == 0)
        csc = M.tocsc()
        try:
            if self.symmetric:
                self._lu = spla.splu(
                    csc,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            else:
                self._lu = spla.splu(csc, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
        self._check_pivots(csc)

    def _check_pivots(self, csc):
        pivots = np.abs(self._lu.U.diagonal())
        # Pr M Pc = L U, so column j of U comes from column argsort(perm_c)[j] of M
        colmax = abs(csc).max(axis=0).toarray().ravel()
        colmax = colmax[np.argsort(self._lu.perm_c)]
        bad = np.flatnonzero(~(pivots >= PIVOT_RTOL * colmax) | (colmax == 0))
        if bad.size:
            j = int(bad[0])
            raise SingularMatrixError(
                f"numerically singular pivot at position {j} "
                f"(|pivot| = {pivots[j]:.3e}, column max = {colmax[j]:.3e})",
                pivot=j,
            )

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has length {b.shape[0]}, expected {self.n}")
        return self._lu.solve(b)


def factorize(M) -> Factorization:
    return Factorization(M)


@dataclass(frozen=True)
class BorderedSolution:
    """Newton step ``(delta, delta_lambda)`` plus the two inner solves.

    ``p = J^{-1} u`` and ``q = J^{-1} r``; ``lemma1_slack = s + u.q`` is
    nonnegative whenever ``r >= 0`` and vanishes only at an eigenpair.
    """

    delta: np.ndarray
    delta_lambda: float
    p: np.ndarray
    q: np.ndarray
    lemma1_slack: float


def solve_bordered(fact: Factorization, u, r) -> BorderedSolution:
    """Solve ``J d - dl u = -r``, ``u.d = (1 - u.u)/2`` by block elimination.

    Two solves against one factorisation of ``J``:
    ``p = J^{-1} u``, ``q = J^{-1} r``, ``dl = (s + u.q) / u.p``, ``d = dl p - q``.
    """
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    rhs = np.column_stack([u, r])
    sol = fact.solve(rhs)
    p, q = sol[:, 0], sol[:, 1]
    s = 0.5 * (1.0 - u @ u)
    utp = u @ p
    if not utp > 0:
        raise ConsistencyError(
            f"u^T J^-1 u = {utp!r} is not positive; J is not a nonsingular M-matrix"
        )
    slack = s + u @ q
    dl = slack / utp
    delta = dl * p - q
    return BorderedSolution(delta=delta, delta_lambda=float(dl), p=p, q=q, lemma1_slack=float(slack))


def read_matrix_market(path) -> sp.csr_array:
    """Read a real MatrixMarket coordinate file (general or symmetric) into CSR."""
    M = scipy.io.mmread(path)
    if not sp.issparse(M):
        raise ValueError(f"{path}: expected coordinate format, got a dense array")
    if np.iscomplexobj(M.data):
        raise ValueError(f"{path}: complex matrices are not supported")
    return as_csr(M)


def write_matrix_market(path, M, symmetric=None):
    """Write ``M`` as a real MatrixMarket coordinate file.

    ``symmetric=None`` picks the symmetric header when ``M == M^T``.
    """
    M = as_csr(M)
    if symmetric is None:
        symmetric = M.shape[0] == M.shape[1] and (M != M.T).nnz == 0
    scipy.io.mmwrite(
        path,
        sp.coo_matrix(M),
        field="real",
        symmetry="symmetric" if symmetric else "general",
    )
