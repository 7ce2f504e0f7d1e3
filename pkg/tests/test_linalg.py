import numpy as np
import pytest
import scipy.sparse as sp

from newton_noda.linalg import (
    ConsistencyError,
    SingularMatrixError,
    StructureError,
    as_csr,
    certify_irreducible_m_matrix,
    certify_m_matrix,
    factorize,
    read_matrix_market,
    solve_bordered,
    validate_irreducible,
    validate_z_pattern,
    write_matrix_market,
)
from newton_noda.problem import build_laplacian_1d, build_laplacian_2d, jacobian, lambda_floor, residual
from newton_noda.verify import dense_bordered_oracle, random_m_matrix

from conftest import SQ


def gauss_solve(M, b):
    """Textbook Gaussian elimination with partial pivoting; the independent dense oracle."""
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + np.argmax(np.abs(M[k:, k]))
        M[[k, p]] = M[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = M[i, k] / M[k, k]
            M[i, k:] -= f * M[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (b[i] - M[i, i + 1:] @ x[i + 1:]) / M[i, i]
    return x


def test_as_csr_canonical():
    M = sp.coo_array(([1.0, 2.0, -1.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    C = as_csr(M)
    assert C.has_canonical_format
    assert C[0, 1] == 3.0
    assert np.all(np.diff(C.indptr) >= 0)


def test_z_pattern():
    assert validate_z_pattern(build_laplacian_2d(2))
    assert not validate_z_pattern(np.array([[2.0, 1.0], [-1.0, 2.0]]))
    assert validate_z_pattern(np.eye(3))
    with pytest.raises(ValueError):
        validate_z_pattern(np.ones((2, 3)))


def test_irreducible():
    assert validate_irreducible(build_laplacian_2d(3))
    block = sp.block_diag([np.array([[2.0, -1.0], [-1.0, 2.0]]), np.array([[1.0]])])
    assert not validate_irreducible(block)
    assert validate_irreducible(np.array([[2.0]]))
    # one-way coupling is reducible even though the undirected graph is connected
    assert not validate_irreducible(np.array([[2.0, -1.0], [0.0, 2.0]]))
    with pytest.raises(ValueError):
        validate_irreducible(np.ones((2, 3)))


def test_certify_m_matrix(prob2):
    J = jacobian(prob2, [SQ, SQ], 4 / 3).J
    assert certify_m_matrix(J, [SQ, SQ])
    assert not certify_m_matrix(np.array([[1.0, -2.0], [-2.0, 1.0]]), [1.0, 1.0])
    assert certify_m_matrix(np.eye(4), [0.1, 2.0, 3.0, 7.0])
    with pytest.raises(StructureError):
        certify_m_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]), [1.0, 1.0])
    with pytest.raises(ValueError):
        certify_m_matrix(np.eye(2), [1.0, 0.0])



def test_weak_certificate_linear_case():
    # interior rows of the stencil sum to zero: strict test fails, weak one holds
    T = build_laplacian_1d(6)
    ones = np.ones(6)
    assert not certify_m_matrix(T, ones)
    assert certify_irreducible_m_matrix(T, ones)
    # singular: all row sums zero
    S = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert not certify_irreducible_m_matrix(S, [1.0, 1.0])
    # reducible: weak dominance is not enough
    assert not certify_irreducible_m_matrix(sp.csr_array(np.array([[1.0, 0.0], [0.0, 0.0]])), [1.0, 1.0])
    assert not certify_irreducible_m_matrix(np.array([[1.0, -2.0], [-2.0, 1.0]]), [1.0, 1.0])
    with pytest.raises(StructureError):
        certify_irreducible_m_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]), [1.0, 1.0])

def test_factorize_small():
    F = factorize(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert F.symmetric and F.n == 2
    np.testing.assert_allclose(F.solve([1.0, 1.0]), [1.0, 1.0], rtol=1e-15)


def test_factorize_matches_gauss_oracle():
    rng = np.random.default_rng(0)
    L5 = build_laplacian_2d(5)
    F = factorize(L5)
    for _ in range(20):
        b = rng.normal(size=25)
        np.testing.assert_allclose(F.solve(b), gauss_solve(L5.toarray(), b), rtol=1e-12, atol=1e-12)


def test_factorize_backward_error_large():
    rng = np.random.default_rng(1)
    L = build_laplacian_2d(50, scale_by_h2=True)
    F = factorize(L)
    for _ in range(20):
        b = rng.normal(size=L.shape[0])
        x = F.solve(b)
        assert np.linalg.norm(L @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_factorize_unsymmetric():
    rng = np.random.default_rng(2)
    M = random_m_matrix(rng, 30)
    F = factorize(M)
    assert not F.symmetric
    b = rng.normal(size=30)
    np.testing.assert_allclose(F.solve(b), gauss_solve(M.toarray(), b), rtol=1e-12)


@pytest.mark.parametrize(
    "M",
    [np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([[1.0, 2.0], [2.0, 4.0 + 1e-16]]), np.zeros((3, 3))],
)
def test_factorize_singular(M):
    with pytest.raises(SingularMatrixError):
        factorize(M)


def test_singular_pivot_index_reported():
    # second pivot is 1e-15 against a column maximum of ~1
    M = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    with pytest.raises(SingularMatrixError) as info:
        factorize(M)
    assert info.value.pivot == 1


def test_tiny_but_well_scaled_column_is_not_singular():
    F = factorize(np.diag([1.0, 1.0, 1e-20]))
    np.testing.assert_allclose(F.solve([1.0, 1.0, 1e-20]), [1.0, 1.0, 1.0])


def test_bordered_at_eigenpair(prob2):
    u = np.array([SQ, SQ])
    F = factorize(jacobian(prob2, u, 4 / 3).J)
    sol = solve_bordered(F, u, residual(prob2, u, 4 / 3))
    assert np.max(np.abs(sol.delta)) <= 1e-15
    assert abs(sol.delta_lambda) <= 1e-15
    assert np.max(np.abs(sol.q)) <= 1e-15
    assert np.all(sol.p > 0)


def test_bordered_worked_example(prob2):
    u = np.array([0.6, 0.8])
    lam = lambda_floor(prob2, u)
    sol = solve_bordered(factorize(jacobian(prob2, u, lam).J), u, residual(prob2, u, lam))
    # 40-digit mpmath solve of the full 3x3 Newton system
    np.testing.assert_allclose(
        sol.delta, [0.09866173555842269667, -0.07399630166881702250], rtol=1e-12
    )
    assert sol.delta_lambda == pytest.approx(0.40658611227098934254, rel=1e-12)
    d_ref, dl_ref = dense_bordered_oracle(prob2, u, lam)
    np.testing.assert_allclose(sol.delta, d_ref, rtol=1e-12)
    assert sol.delta_lambda == pytest.approx(dl_ref, rel=1e-12)
    assert abs(u @ sol.delta) <= 1e-15
    assert sol.lemma1_slack > 0
    assert np.all(u + sol.delta > 0)


def test_bordered_nonunit_u(prob2):
    # with ||u|| != 1 the constraint row is u.delta = (1 - u.u)/2
    u = np.array([0.9, 1.1])
    lam = lambda_floor(prob2, u)
    J = jacobian(prob2, u, lam).J
    r = residual(prob2, u, lam)
    sol = solve_bordered(factorize(J), u, r)
    assert u @ sol.delta == pytest.approx(0.5 * (1 - u @ u), abs=1e-12)
    np.testing.assert_allclose(J @ sol.delta - sol.delta_lambda * u, -r, atol=1e-12)


def test_bordered_rejects_non_m_matrix():
    # J^-1 u <= 0 when J is not a nonsingular M-matrix
    F = factorize(np.array([[-1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ConsistencyError):
        solve_bordered(F, [SQ, SQ], [0.0, 0.0])


def test_matrix_market_roundtrip(tmp_path):
    L = build_laplacian_2d(4)
    path = tmp_path / "lap.mtx"
    write_matrix_market(path, L)
    header = path.read_text().splitlines()[0]
    assert header == "%%MatrixMarket matrix coordinate real symmetric"
    back = read_matrix_market(path)
    assert (back != L).nnz == 0

    rng = np.random.default_rng(5)
    M = random_m_matrix(rng, 12)
    path = tmp_path / "rand.mtx"
    write_matrix_market(path, M)
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate real general")
    np.testing.assert_allclose(read_matrix_market(path).toarray(), M.toarray(), rtol=1e-15)


def test_matrix_market_one_based(tmp_path):
    path = tmp_path / "hand.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n"
        "1 1 2.0\n"
        "1 2 -1.0\n"
        "2 2 3.0\n"
    )
    np.testing.assert_array_equal(read_matrix_market(path).toarray(), [[2.0, -1.0], [0.0, 3.0]])
