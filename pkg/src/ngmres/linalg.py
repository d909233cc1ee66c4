"""Matrix/vector primitives and the rank-aware least-squares kernel.

Dense matrices are plain ``numpy.ndarray`` objects; sparse matrices are
``scipy.sparse`` CSR arrays. Every inner least-squares problem solved by the
accelerators goes through :func:`min_norm_lstsq`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Coefficients of ``min ||f - W beta||`` plus rank bookkeeping."""

    coefficients: np.ndarray
    numerical_rank: int
    min_norm_applied: bool
    residual_norm: float


def is_sparse(A) -> bool:
    return sp.issparse(A)


def check_finite(*arrays, name="input"):
    for a in arrays:
        data = a.data if sp.issparse(a) else np.asarray(a)
        if not np.all(np.isfinite(data)):
            raise ValueError(f"{name} contains non-finite entries")


def as_csr(A) -> sp.csr_array:
    """Return a canonical CSR array (sorted, duplicate-free indices)."""
    C = sp.csr_array(A, dtype=float)
    C.sum_duplicates()
    C.sort_indices()
    check_finite(C, name="sparse matrix")
    return C


def validate_csr(C) -> None:
    """Raise ``ValueError`` unless ``C`` satisfies the CSR storage invariants."""
    indptr, indices = C.indptr, C.indices
    if np.any(np.diff(indptr) < 0):
        raise ValueError("row offsets must be nondecreasing")
    for i in range(C.shape[0]):
        cols = indices[indptr[i]:indptr[i + 1]]
        if np.any(np.diff(cols) <= 0):
            raise ValueError(f"column indices not strictly increasing in row {i}")
    if indices.size and (indices.max() >= C.shape[1] or indices.min() < 0):
        raise ValueError("column index out of range")
    check_finite(C, name="sparse matrix")


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x`` after a shape check."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {A.shape[0]}x{A.shape[1]}, "
            f"vector has length {x.shape[0] if x.ndim == 1 else x.shape}"
        )
    return np.asarray(A @ x, dtype=float)


def to_dense(A) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def _min_norm_from_cod(R: np.ndarray, rank: int, c: np.ndarray) -> np.ndarray:
    # [R11 R12] has full row rank; its minimum-norm solution comes from a QR
    # of the transpose (complete orthogonal decomposition).
    T = R[:rank, :]
    Q2, R2 = np.linalg.qr(T.T)
    u = scipy.linalg.solve_triangular(R2, c[:rank], trans="T", lower=False)
    return Q2 @ u


def min_norm_lstsq(W, f, rank_tol: float = DEFAULT_RANK_TOL, method: str = "qr") -> LeastSquaresSolution:
    """Solve ``min ||f - W beta||_2``, returning the minimum-norm minimizer.

    The default method factors ``W P = Q R`` with column pivoting. Columns whose
    pivot ``|R_ii|`` falls at or below ``rank_tol * |R_11|`` (``|R_11|`` is the
    largest column norm of ``W``) are treated as dependent, and the
    minimum-norm solution is recovered from a complete orthogonal
    decomposition.

    ``method="normal"`` solves ``W^T W beta = W^T f`` directly instead; it is
    kept only for cross-checking well-conditioned full-rank cases.
    """
    W = np.asarray(W, dtype=float)
    f = np.asarray(f, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    n, p = W.shape
    if n < 1 or p < 1:
        raise ValueError("W must have at least one row and one column")
    if f.shape != (n,):
        raise ValueError(f"right-hand side has length {f.shape}, expected {n}")
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    check_finite(W, f, name="least-squares data")

    if method == "normal":
        beta = np.linalg.solve(W.T @ W, W.T @ f)
        res = float(np.linalg.norm(f - W @ beta))
        return LeastSquaresSolution(beta, p, False, res)
    if method != "qr":
        raise ValueError(f"unknown method {method!r}")

    Q, R, perm = scipy.linalg.qr(W, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        beta = np.zeros(p)
        return LeastSquaresSolution(beta, 0, True, float(np.linalg.norm(f)))
    rank = int(np.count_nonzero(diag > rank_tol * diag[0]))
    c = Q.T @ f
    if rank == p:
        z = scipy.linalg.solve_triangular(R, c, lower=False)
    else:
        z = _min_norm_from_cod(R, rank, c)
    beta = np.empty(p)
    beta[perm] = z
    res = float(np.linalg.norm(f - W @ beta))
    return LeastSquaresSolution(beta, rank, rank < p, res)


def sym_eig_extremes(S, rtol: float = 1e-12) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    S = to_dense(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.linalg.norm(S)
    if np.linalg.norm(S - S.T) > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not symmetric to within tolerance")
    w = scipy.linalg.eigvalsh(S)
    return float(w[0]), float(w[-1])


def spectral_norm(A) -> float:
    return float(np.linalg.norm(to_dense(A), 2))


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(to_dense(A)))))
