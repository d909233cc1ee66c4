import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ngmres.linalg import (
    as_csr,
    matvec,
    min_norm_lstsq,
    spectral_norm,
    spectral_radius,
    sym_eig_extremes,
    validate_csr,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


# -- matvec -----------------------------------------------------------------


def test_matvec_identity():
    np.testing.assert_array_equal(matvec(np.eye(2), [3.0, 4.0]), [3.0, 4.0])


def test_matvec_zero():
    np.testing.assert_array_equal(matvec(np.zeros((2, 2)), [1.0, 1.0]), [0.0, 0.0])


def test_matvec_diagonal():
    np.testing.assert_array_equal(matvec(np.diag([1.0, 2.0]), [1.0, 1.0]), [1.0, 2.0])


def test_matvec_sparse_matches_dense():
    A = np.array([[1.0, 0.0, 2.0], [0.0, 3.0, 0.0], [4.0, 0.0, 5.0]])
    x = np.array([1.0, -1.0, 0.5])
    np.testing.assert_array_equal(matvec(as_csr(A), x), A @ x)


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        matvec(np.eye(3), np.ones(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    arrays(float, (n, n), elements=finite),
    arrays(float, n, elements=finite),
    arrays(float, n, elements=finite),
)))
def test_matvec_distributes_over_addition(data):
    A, x, y = data
    lhs = matvec(A, x + y)
    rhs = matvec(A, x) + matvec(A, y)
    scale = np.abs(A).sum() * (np.abs(x).max() + np.abs(y).max()) + 1.0
    assert np.abs(lhs - rhs).max() <= 1e-14 * scale


def test_csr_normalization_merges_duplicates_and_sorts():
    C = sp.coo_array(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    csr = as_csr(C)
    validate_csr(csr)
    np.testing.assert_array_equal(csr.toarray(), [[0.0, 3.0], [3.0, 0.0]])


def test_validate_csr_rejects_unsorted_columns():
    bad = sp.csr_array((np.array([1.0, 2.0]), np.array([1, 0]), np.array([0, 2, 2])), shape=(2, 2))
    with pytest.raises(ValueError, match="strictly increasing"):
        validate_csr(bad)


# -- min_norm_lstsq ---------------------------------------------------------


def test_lstsq_identity():
    sol = min_norm_lstsq(np.eye(2), np.array([1.0, 2.0]))
    np.testing.assert_allclose(sol.coefficients, [1.0, 2.0])
    assert sol.numerical_rank == 2
    assert not sol.min_norm_applied


def test_lstsq_single_column_projection():
    sol = min_norm_lstsq(np.array([[1.0], [0.0]]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(sol.coefficients, [3.0])
    assert sol.residual_norm == pytest.approx(4.0)


def test_lstsq_rank_deficient_takes_min_norm():
    sol = min_norm_lstsq(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([2.0, 2.0]))
    np.testing.assert_allclose(sol.coefficients, [1.0, 1.0], atol=1e-14)
    assert sol.numerical_rank == 1
    assert sol.min_norm_applied


def test_lstsq_rank_deficient_grid_search_oracle():
    # Every grid point on the solution line b1 + b2 = 2 attains the minimum; the
    # returned point must be the one closest to the origin among them.
    W = np.array([[1.0, 1.0], [1.0, 1.0]])
    f = np.array([2.0, 2.0])
    sol = min_norm_lstsq(W, f)
    grid = np.linspace(-3, 3, 601)
    b1, b2 = np.meshgrid(grid, grid)
    res = np.hypot(2 - b1 - b2, 2 - b1 - b2)
    minimizers = res <= res.min() + 1e-12
    smallest = np.min(np.hypot(b1[minimizers], b2[minimizers]))
    assert np.linalg.norm(sol.coefficients) <= smallest + 1e-12


def test_lstsq_zero_matrix():
    sol = min_norm_lstsq(np.zeros((3, 2)), np.ones(3))
    np.testing.assert_array_equal(sol.coefficients, [0.0, 0.0])
    assert sol.numerical_rank == 0
    assert sol.min_norm_applied


def test_lstsq_matches_pinv_on_rank_deficient_tall_matrix():
    rng = np.random.default_rng(3)
    U = rng.standard_normal((10, 2))
    W = U @ rng.standard_normal((2, 4))  # rank 2, four columns
    f = rng.standard_normal(10)
    sol = min_norm_lstsq(W, f)
    np.testing.assert_allclose(sol.coefficients, np.linalg.pinv(W) @ f, rtol=1e-9, atol=1e-12)
    assert sol.numerical_rank == 2


@pytest.mark.parametrize(
    "W, f",
    [
        (np.array([[np.nan]]), np.array([1.0])),
        (np.eye(2), np.array([np.inf, 0.0])),
    ],
)
def test_lstsq_rejects_non_finite(W, f):
    with pytest.raises(ValueError, match="non-finite"):
        min_norm_lstsq(W, f)


def test_lstsq_rejects_bad_shapes_and_tolerance():
    with pytest.raises(ValueError):
        min_norm_lstsq(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        min_norm_lstsq(np.eye(2), np.ones(2), rank_tol=0.0)
    with pytest.raises(ValueError):
        min_norm_lstsq(np.eye(2), np.ones(2), method="svd")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 6))
def test_lstsq_beats_random_probes(seed, p, extra):
    rng = np.random.default_rng(seed)
    n = p + extra
    W = rng.standard_normal((n, p))
    if p > 1 and seed % 3 == 0:
        W[:, -1] = W[:, 0]  # force a rank deficiency on some draws
    f = rng.standard_normal(n)
    beta = min_norm_lstsq(W, f).coefficients
    best = np.linalg.norm(f - W @ beta)
    probes = beta + rng.standard_normal((1000, p)) * rng.uniform(1e-3, 10.0, (1000, 1))
    probe_res = np.linalg.norm(f[None, :] - probes @ W.T, axis=1)
    assert best <= probe_res.min() + 1e-10 * np.linalg.norm(f)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_lstsq_qr_agrees_with_normal_equations(seed, p):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((p + 4, p)))
    W = Q @ np.diag(rng.uniform(0.5, 2.0, p))  # well conditioned
    f = rng.standard_normal(p + 4)
    qr = min_norm_lstsq(W, f).coefficients
    ne = min_norm_lstsq(W, f, method="normal").coefficients
    np.testing.assert_allclose(qr, ne, rtol=1e-8, atol=1e-12)


# -- spectra ----------------------------------------------------------------


@pytest.mark.parametrize(
    "S, expected",
    [
        (np.diag([1.0, 3.0]), (1.0, 3.0)),
        (np.eye(3), (1.0, 1.0)),
        (np.array([[2.0, 1.0], [1.0, 2.0]]), (1.0, 3.0)),
    ],
)
def test_sym_eig_extremes(S, expected):
    lo, hi = sym_eig_extremes(S)
    assert lo == pytest.approx(expected[0], rel=1e-12)
    assert hi == pytest.approx(expected[1], rel=1e-12)


def test_sym_eig_extremes_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        sym_eig_extremes(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_eig_extremes_accepts_sparse():
    lo, hi = sym_eig_extremes(sp.diags_array([2.0, 5.0, 3.0]))
    assert (lo, hi) == pytest.approx((2.0, 5.0))


def test_spectral_norm_and_radius():
    A = np.array([[0.0, 2.0], [0.0, 0.0]])
    assert spectral_norm(A) == pytest.approx(2.0)
    assert spectral_radius(A) == pytest.approx(0.0)
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert spectral_radius(R) == pytest.approx(1.0)
