import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngmres import solvers as sv
from ngmres.diagnostics import strict_decrease_horizon
from ngmres.linalg import spectral_radius
from ngmres.problems import (
    Problem,
    build_convection_diffusion,
    build_cyclic_shift,
    build_identity,
    convection_diffusion_from_reynolds,
    initial_guess,
    random_problem,
    to_shifted_skew,
)
from ngmres.solvers import FULL
from ngmres.trace import SolveConfig

NO_STALL = SolveConfig(max_iter=80, tol=1e-12, stagnation_steps=0)


def _well_conditioned_6x6(seed=0):
    rng = np.random.default_rng(seed)
    A = 3.0 * np.eye(6) + 0.5 * rng.standard_normal((6, 6))
    return Problem(A, rng.standard_normal(6))


def _cd8(kind):
    if kind == "symmetric":
        return build_convection_diffusion(8, 0.0, 0.0, normalized=True)
    K = convection_diffusion_from_reynolds(8, 0.5, normalized=True)
    return to_shifted_skew(K) if kind == "shifted_skew" else K


# -- GMRES --------------------------------------------------------------------


def test_gmres_identity_one_step():
    p = build_identity(5)
    t = sv.gmres(p, np.zeros(5))
    assert t.iterations == 1
    np.testing.assert_allclose(t.xs[1], p.b, atol=1e-15)
    assert t.termination == "tolerance"


def test_gmres_cyclic_shift_stalls_then_solves():
    p = build_cyclic_shift(5)
    t = sv.gmres(p, np.zeros(5), SolveConfig(max_iter=10, tol=1e-14))
    for k in range(1, 5):
        np.testing.assert_allclose(t.xs[k], 0.0, atol=1e-14)
    np.testing.assert_allclose(t.xs[5], p.x_star, atol=1e-13)


def test_gmres_matches_explicit_krylov_oracle():
    p = _well_conditioned_6x6()
    x0 = np.zeros(6)
    t = sv.gmres(p, x0, SolveConfig(max_iter=6, tol=1e-15))
    A = p.dense()
    r0 = A @ x0 - p.b
    for k in range(1, t.iterations + 1):
        V = np.column_stack([np.linalg.matrix_power(A, j) @ r0 for j in range(k)])
        z, *_ = np.linalg.lstsq(A @ V, -r0, rcond=None)
        oracle = np.linalg.norm(r0 + A @ V @ z)
        assert t.resnorms[k] == pytest.approx(oracle, rel=1e-9, abs=1e-12 * np.linalg.norm(r0))


def test_gmres_records_true_residuals():
    p = _cd8("general")
    t = sv.gmres(p, initial_guess("random", p.n, 1), NO_STALL)
    assert t.residual_drift(p) <= 1e-12


def test_solve_rejects_unknown_name():
    with pytest.raises(ValueError, match="unknown solver"):
        sv.solve("bicgstab", build_identity(2), np.zeros(2))


# -- NGMRES -------------------------------------------------------------------


def test_full_ngmres_tracks_gmres_on_shifted_skew():
    p = _cd8("shifted_skew")
    x0 = initial_guess("random", p.n, 42)
    g = sv.gmres(p, x0, NO_STALL)
    ng = sv.ngmres(p, x0, FULL, NO_STALL)
    r0 = g.r0_norm
    for k in range(min(len(g), len(ng))):
        if g.resnorms[k] <= 1e-8 * r0:
            break
        assert np.linalg.norm(ng.residuals[k] - g.residuals[k]) <= 1e-8 * r0


def test_full_ngmres_stays_at_zero_on_cyclic_shift():
    p = build_cyclic_shift(5)
    t = sv.ngmres(p, np.zeros(5), FULL, SolveConfig(max_iter=10))
    assert all(np.abs(x).max() <= 1e-14 for x in t.xs)
    assert t.termination == "stagnation"
    assert any(t.min_norm[1:])


def test_full_ngmres_from_ones_matches_gmres_on_cyclic_shift():
    p = build_cyclic_shift(5)
    cfg = SolveConfig(max_iter=10, tol=1e-13)
    g = sv.gmres(p, np.ones(5), cfg)
    ng = sv.ngmres(p, np.ones(5), FULL, cfg)
    np.testing.assert_allclose(ng.xs[5], p.x_star, atol=1e-12)
    for k in range(6):
        np.testing.assert_allclose(ng.xs[k], g.xs[k], atol=1e-12)


def test_ngmres_rejects_negative_window():
    with pytest.raises(ValueError):
        sv.ngmres(build_identity(2), np.zeros(2), -1)


# -- Anderson acceleration ----------------------------------------------------


def test_aa_window_zero_is_fixed_point_iteration():
    p = _cd8("general")
    x0 = initial_guess("random", p.n, 3)
    t = sv.anderson(p, x0, 0, SolveConfig(max_iter=10, stagnation_steps=0))
    A = p.dense()
    x = x0
    for k in range(1, len(t)):
        x = x - A @ x + p.b
        np.testing.assert_allclose(t.xs[k], x, rtol=1e-12, atol=1e-12)


def test_full_aa_steps_from_gmres_iterates():
    p = _cd8("general")
    x0 = initial_guess("random", p.n, 42)
    g = sv.gmres(p, x0, NO_STALL)
    aa = sv.anderson(p, x0, FULL, NO_STALL)
    horizon = strict_decrease_horizon(g)
    assert horizon >= 5
    scale = np.linalg.norm(g.xs[0]) + 1.0
    for j in range(min(horizon, len(aa) - 1)):
        if g.resnorms[j] <= 1e-8 * g.r0_norm:
            break
        expected = g.xs[j] - g.residuals[j]
        assert np.linalg.norm(aa.xs[j + 1] - expected) <= 1e-8 * scale


def test_aa_diverges_when_iteration_matrix_expands():
    rng = np.random.default_rng(11)
    A = 2.5 * rng.standard_normal((5, 5))
    M = np.eye(5) - A
    assert spectral_radius(M) > 1.0
    p = Problem(A, rng.standard_normal(5))
    t = sv.anderson(p, np.zeros(5), 0, SolveConfig(max_iter=30, stagnation_steps=0))
    assert t.resnorms[-1] > 1e3 * t.resnorms[0]


def test_aa_recursive_residual_matches_explicit():
    p = _cd8("symmetric")
    x0 = initial_guess("random", p.n, 5)
    cfg = SolveConfig(max_iter=15, residual_mode="recursive", stagnation_steps=0)
    t = sv.anderson(p, x0, 3, cfg)
    assert t.residual_drift(p) <= 1e-10


# -- MR -------------------------------------------------------------------------


def test_mr_identity_alpha_one():
    t = sv.mr_iteration(build_identity(3), np.zeros(3))
    assert t.coefficients[1][0] == pytest.approx(1.0)
    assert t.iterations == 1


def test_mr_first_step_length_small_example():
    p = Problem(np.diag([1.0, 2.0]), np.array([1.0, 2.0]))
    t = sv.mr_iteration(p, np.zeros(2), SolveConfig(max_iter=1))
    np.testing.assert_array_equal(t.residuals[0], [-1.0, -2.0])
    assert t.coefficients[1][0] == pytest.approx(9 / 17, rel=1e-15)


def test_mr_on_skew_matrix_never_moves():
    p = Problem(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([1.0, 0.0]))
    x0 = np.array([0.3, -0.2])
    t = sv.mr_iteration(p, x0, SolveConfig(max_iter=10))
    assert all(abs(c[0]) <= 1e-15 for c in t.coefficients[1:])
    assert all(np.abs(x - x0).max() <= 1e-15 for x in t.xs)


# -- three-term NGMRES(1) -------------------------------------------------------


@pytest.mark.parametrize("kind", ["symmetric", "general", "shifted_skew"])
def test_three_term_matches_windowed_ngmres1(kind):
    p = _cd8(kind)
    x0 = initial_guess("random", p.n, 42)
    a = sv.ngmres(p, x0, 1, NO_STALL)
    b = sv.ngmres1_three_term(p, x0, NO_STALL)
    assert len(a) == len(b)
    for xa, xb in zip(a.xs, b.xs):
        assert np.linalg.norm(xa - xb) <= 1e-12 * max(1.0, np.linalg.norm(xa))


def test_three_term_symmetric_matches_gmres():
    p = _cd8("symmetric")
    x0 = initial_guess("random", p.n, 42)
    g = sv.gmres(p, x0, NO_STALL)
    t = sv.ngmres1_three_term(p, x0, NO_STALL)
    for k in range(min(len(g), len(t))):
        assert abs(t.resnorms[k] - g.resnorms[k]) <= 1e-8 * g.r0_norm


def test_three_term_cross_term_vanishes_for_symmetric():
    p = _cd8("symmetric")
    t = sv.ngmres1_three_term(p, initial_guess("random", p.n, 42), NO_STALL)
    active = [c for c, r in zip(t.extras["cross_term"], t.resnorms[1:]) if r > 1e-8 * t.r0_norm]
    assert active and max(abs(c) for c in active) <= 1e-8


def test_three_term_cross_term_nonzero_for_nonsymmetric():
    p = _cd8("general")
    t = sv.ngmres1_three_term(p, initial_guess("random", p.n, 42), NO_STALL)
    assert max(abs(c) for c in t.extras["cross_term"]) > 1e-3


# -- CR -------------------------------------------------------------------------


def test_cr_identity_one_step():
    p = Problem(np.eye(4), np.arange(1.0, 5.0), "symmetric")
    t = sv.conjugate_residual(p, np.zeros(4))
    assert t.iterations == 1
    np.testing.assert_allclose(t.xs[1], p.b)


def test_cr_first_alpha_matches_mr():
    p = Problem(np.diag([1.0, 2.0]), np.array([1.0, 2.0]), "symmetric")
    t = sv.conjugate_residual(p, np.zeros(2), SolveConfig(max_iter=1))
    assert t.coefficients[1][0] == pytest.approx(9 / 17, rel=1e-15)


def test_cr_matches_three_term_on_spd():
    p = _cd8("symmetric")
    x0 = initial_guess("random", p.n, 42)
    cr = sv.conjugate_residual(p, x0, NO_STALL)
    t = sv.ngmres1_three_term(p, x0, NO_STALL)
    for k in range(min(len(cr), len(t))):
        assert abs(cr.resnorms[k] - t.resnorms[k]) <= 1e-8 * cr.r0_norm


def test_cr_requires_symmetric_problem():
    with pytest.raises(ValueError, match="symmetric"):
        sv.conjugate_residual(_cd8("general"), np.zeros(64))


def test_cr_flags_breakdown_on_indefinite():
    # s0 = b with s0^T A s0 = 0 for A = diag(1, -1)
    p = Problem(np.diag([1.0, -1.0]), np.array([1.0, 1.0]), "symmetric")
    t = sv.conjugate_residual(p, np.zeros(2))
    assert t.termination == "breakdown"


# -- preconditioning ------------------------------------------------------------


def test_identity_preconditioner_gives_identical_traces():
    p = _cd8("general")
    x0 = initial_guess("random", p.n, 42)
    pp = sv.left_precondition(p, lambda v: v)
    for name in ("gmres", "ngmres", "anderson"):
        a = sv.solve(name, p, x0, NO_STALL, window=2)
        b = sv.solve(name, pp, x0, NO_STALL, window=2)
        assert len(a) == len(b)
        assert all(np.array_equal(u, v) for u, v in zip(a.residuals, b.residuals))


def test_exact_preconditioner_converges_in_one_step():
    p = _cd8("general")
    A = p.dense()
    pp = sv.left_precondition(p, lambda v: np.linalg.solve(A, v))
    t = sv.gmres(pp, initial_guess("random", p.n, 42), SolveConfig(tol=1e-10))
    assert t.iterations == 1
    np.testing.assert_allclose(t.xs[1], p.x_star, atol=1e-10)


def test_diagonal_preconditioned_full_ngmres_tracks_gmres():
    p = convection_diffusion_from_reynolds(8, 0.5)
    pp = sv.left_precondition(p, sv.diagonal_preconditioner(p))
    x0 = initial_guess("random", p.n, 42)
    g = sv.gmres(pp, x0, NO_STALL)
    ng = sv.ngmres(pp, x0, FULL, NO_STALL)
    horizon = strict_decrease_horizon(g)
    assert horizon >= 2
    for k in range(min(horizon + 1, len(ng))):
        if g.resnorms[k] <= 1e-8 * g.r0_norm:
            break
        assert np.linalg.norm(ng.residuals[k] - g.residuals[k]) <= 1e-8 * g.r0_norm


# -- properties -------------------------------------------------------------------

kinds = st.sampled_from(["general", "positive_real", "symmetric", "shifted_skew_symmetric"])
windows = st.sampled_from([0, 1, 2, 3, 5, FULL])


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from(["positive_real", "symmetric", "shifted_skew_symmetric"]),
    windows,
)
def test_ngmres_residuals_never_increase(seed, kind, m):
    p = random_problem(12, kind, np.random.default_rng(seed))
    t = sv.ngmres(p, initial_guess("random", p.n, seed), m, SolveConfig(max_iter=25))
    slack = 1e-12 * t.r0_norm
    assert all(b <= a + slack for a, b in zip(t.resnorms, t.resnorms[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), windows)
def test_ngmres_increase_on_general_matrices_is_rounding(seed, m):
    # During a stall the coefficients can reach 1e6 at full numerical rank, so the
    # recomputed residual carries error near eps * sum|beta| * (||A|| ||x|| + ||b||).
    # Any increase in the residual norm has to stay inside that envelope.
    p = random_problem(12, "general", np.random.default_rng(seed))
    t = sv.ngmres(p, initial_guess("random", p.n, seed), m, SolveConfig(max_iter=25))
    eps = np.finfo(float).eps
    normA = np.linalg.norm(p.dense(), 2)
    for k in range(1, len(t)):
        xmax = max(np.linalg.norm(x) for x in t.xs[max(0, k - 7) : k + 1])
        envelope = eps * (1 + np.abs(t.coefficients[k]).sum()) * (normA * xmax + np.linalg.norm(p.b))
        assert t.resnorms[k] <= t.resnorms[k - 1] + 1e-12 * t.r0_norm + 10 * envelope


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4, FULL]))
def test_recursive_residuals_match_explicit(seed, m):
    p = random_problem(10, "positive_real", np.random.default_rng(seed))
    x0 = initial_guess("random", p.n, seed)
    cfg = SolveConfig(max_iter=8, residual_mode="recursive", stagnation_steps=0)
    t = sv.ngmres(p, x0, m, cfg)
    assert t.residual_drift(p) <= 1e-10
    # the recursive update is the combination of M r_k and the stored residuals
    A = p.dense()
    M = np.eye(p.n) - A
    for k in range(1, min(4, t.iterations)):
        beta = t.coefficients[k + 1]
        past = [t.residuals[k - i] for i in range(len(beta))]
        expected = (1 + beta.sum()) * (M @ t.residuals[k]) - sum(bi * ri for bi, ri in zip(beta, past))
        assert np.linalg.norm(expected - t.residuals[k + 1]) <= 1e-10 * t.r0_norm


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), kinds)
def test_gmres_is_optimal_among_solvers(seed, kind):
    p = random_problem(12, kind, np.random.default_rng(seed))
    x0 = initial_guess("random", p.n, seed)
    cfg = SolveConfig(max_iter=12, tol=1e-13)
    g = sv.gmres(p, x0, cfg)
    others = [sv.ngmres(p, x0, m, cfg) for m in (0, 1, 3, FULL)]
    others += [sv.anderson(p, x0, 2, cfg), sv.mr_iteration(p, x0, cfg), sv.ngmres1_three_term(p, x0, cfg)]
    slack = 1e-10 * g.r0_norm
    for t in others:
        for k in range(1, min(len(g), len(t))):
            assert g.resnorms[k] <= t.resnorms[k] + slack


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), kinds)
def test_first_step_is_universal(seed, kind):
    p = random_problem(10, kind, np.random.default_rng(seed))
    x0 = initial_guess("random", p.n, seed)
    cfg = SolveConfig(max_iter=1)
    ref = sv.mr_iteration(p, x0, cfg).xs[1]
    firsts = [sv.gmres(p, x0, cfg).xs[1], sv.ngmres1_three_term(p, x0, cfg).xs[1]]
    firsts += [sv.ngmres(p, x0, m, cfg).xs[1] for m in (0, 1, 4, FULL)]
    for x1 in firsts:
        assert np.linalg.norm(x1 - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))
