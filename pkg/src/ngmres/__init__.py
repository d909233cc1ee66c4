"""NGMRES, Anderson acceleration and GMRES for linear systems, with the
diagnostics that compare them."""

from .diagnostics import (
    BoundReport,
    OrthogonalityReport,
    PolynomialTrace,
    check_aa_orthogonality,
    check_contraction,
    check_equivalence,
    check_orthogonality,
    compare_traces,
    compute_bounds,
    strict_decrease_horizon,
    track_polynomial,
)
from .linalg import LeastSquaresSolution, min_norm_lstsq
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .problems import (
    Problem,
    build_convection_diffusion,
    build_cyclic_shift,
    build_identity,
    convection_diffusion_from_reynolds,
    initial_guess,
    random_problem,
    to_shifted_skew,
)
from .solvers import (
    FULL,
    SOLVERS,
    anderson,
    conjugate_residual,
    diagonal_preconditioner,
    gmres,
    left_precondition,
    mr_iteration,
    ngmres,
    ngmres1_three_term,
    solve,
)
from .trace import IterationTrace, SolveConfig

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
