"""Positivity-preserving Newton-Noda solver for saturable nonlinear Schrodinger ground states."""

from .linalg import (
    BorderedSolution,
    Factorization,
    certify_irreducible_m_matrix,
    certify_m_matrix,
    factorize,
    read_matrix_market,
    solve_bordered,
    validate_irreducible,
    validate_z_pattern,
    write_matrix_market,
)
from .nni import SolverConfig, SolveTrace, Status, initialize, solve
from .problem import (
    NaepProblem,
    apply_operator,
    build_laplacian_1d,
    build_laplacian_2d,
    discrete_energy,
    jacobian,
    lambda_floor,
    nonlinear_diagonal,
    residual,
)

__version__ = "0.1.0"
