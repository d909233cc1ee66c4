"""GMRES, NGMRES(m), Anderson acceleration, MR, three-term NGMRES(1) and CR.

All solvers take a problem exposing ``n``, ``b``, ``matvec`` and ``residual``
(a :class:`~ngmres.problems.Problem` or a :class:`PreconditionedProblem`),
an initial guess and a :class:`~ngmres.trace.SolveConfig`, and return an
:class:`~ngmres.trace.IterationTrace`. Residuals are always ``A x - b``.

The fixed-point map being accelerated is ``q(x) = x - r(x) = (I - A) x + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .linalg import min_norm_lstsq
from .trace import IterationTrace, SolveConfig
from .window import WindowState, window_advance

FULL = None  # window size meaning "keep the whole history"

GMRES_BREAKDOWN_RTOL = 1e-12


@dataclass(frozen=True)
class FixedPointMap:
    """``q(x) = M x + c`` with ``M = I - A`` and ``c = b``."""

    apply_M: Callable[[np.ndarray], np.ndarray]
    c: np.ndarray

    @classmethod
    def from_problem(cls, problem) -> "FixedPointMap":
        return cls(lambda x: x - problem.matvec(x), problem.b)

    def __call__(self, x):
        return self.apply_M(x) + self.c

    def residual(self, x):
        return x - self(x)


class PreconditionedProblem:
    """Left-preconditioned view ``P^{-1} A x = P^{-1} b`` of a problem.

    Every solver runs unchanged against it; its residual is
    ``P^{-1} A x - P^{-1} b``.
    """

    symmetry_class = "general"

    def __init__(self, base, P_apply: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self.base = base
        self.P_apply = P_apply
        self.b = np.asarray(P_apply(base.b), dtype=float)
        self.label = label or f"P^-1 {base.label}"
        self.x_star = getattr(base, "x_star", None)

    @property
    def n(self) -> int:
        return self.base.n

    def matvec(self, x):
        return np.asarray(self.P_apply(self.base.matvec(x)), dtype=float)

    def residual(self, x):
        return self.matvec(x) - self.b

    def dense(self) -> np.ndarray:
        return np.column_stack([self.matvec(e) for e in np.eye(self.n)])


def left_precondition(problem, P_apply) -> PreconditionedProblem:
    return PreconditionedProblem(problem, P_apply)


def diagonal_preconditioner(problem) -> Callable[[np.ndarray], np.ndarray]:
    d = np.asarray(problem.A.diagonal(), dtype=float)
    if np.any(d == 0):
        raise ZeroDivisionError("diagonal preconditioner needs a zero-free diagonal")
    return lambda v: v / d


def _start(problem, x0, method, window=None):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (problem.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({problem.n},)")
    trace = IterationTrace(method, window)
    trace.record(x0, problem.residual(x0))
    return trace


class _Monitor:
    """Tolerance, stagnation and finiteness bookkeeping for one solve."""

    def __init__(self, trace: IterationTrace, cfg: SolveConfig, stagnation: bool):
        self.trace = trace
        self.cfg = cfg
        self.stagnation = stagnation and cfg.stagnation_steps > 0
        self.r0 = trace.r0_norm
        self.streak = 0

    def initial_done(self) -> bool:
        if self.r0 == 0.0:
            self.trace.termination = "tolerance"
            return True
        return False

    def done(self) -> bool:
        t = self.trace
        k = t.iterations
        if not np.isfinite(t.resnorms[-1]) or not np.all(np.isfinite(t.xs[-1])):
            raise FloatingPointError(f"{t.method}: non-finite arithmetic at iteration {k}")
        if t.resnorms[-1] <= self.cfg.tol * self.r0:
            t.termination = "tolerance"
            return True
        if self.stagnation:
            step = np.linalg.norm(t.residuals[-1] - t.residuals[-2])
            self.streak = self.streak + 1 if step <= self.cfg.stagnation_tol * self.r0 else 0
            if self.streak >= self.cfg.stagnation_steps:
                t.termination = "stagnation"
                return True
        if k >= self.cfg.max_iter:
            t.termination = "max_iter"
            return True
        return False


def gmres(problem, x0, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """Arnoldi GMRES with Givens rotations, extracting ``x_j`` at every step.

    Arnoldi vectors are orthogonalized with classical Gram-Schmidt applied
    twice. A vanishing subdiagonal ``h_{j+1,j}`` (relative to ``||A u_j||``)
    is a lucky breakdown: the current iterate is the exact solution.
    """
    trace = _start(problem, x0, "gmres")
    mon = _Monitor(trace, cfg, stagnation=False)
    if mon.initial_done():
        return trace
    x0 = trace.xs[0]
    n, kmax = problem.n, min(cfg.max_iter, problem.n)
    beta = trace.r0_norm
    V = np.zeros((n, kmax + 1))
    V[:, 0] = -trace.residuals[0] / beta  # classical residual b - A x0
    Hbar = np.zeros((kmax + 1, kmax))
    R = np.zeros((kmax + 1, kmax))
    cs, sn = np.zeros(kmax), np.zeros(kmax)
    g = np.zeros(kmax + 1)
    g[0] = beta

    for j in range(kmax):
        w = problem.matvec(V[:, j])
        wnorm = np.linalg.norm(w)
        Vj = V[:, : j + 1]
        h = Vj.T @ w
        w = w - Vj @ h
        h2 = Vj.T @ w
        w = w - Vj @ h2
        h = h + h2
        hnext = np.linalg.norm(w)
        breakdown = hnext <= GMRES_BREAKDOWN_RTOL * wnorm
        if breakdown:
            hnext = 0.0
        else:
            V[:, j + 1] = w / hnext
        Hbar[: j + 1, j] = h
        Hbar[j + 1, j] = hnext

        col = np.append(h, hnext)
        for i in range(j):
            a, c = col[i], col[i + 1]
            col[i] = cs[i] * a + sn[i] * c
            col[i + 1] = -sn[i] * a + cs[i] * c
        rho = np.hypot(col[j], col[j + 1])
        if rho == 0.0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j], sn[j] = col[j] / rho, col[j + 1] / rho
        col[j], col[j + 1] = rho, 0.0
        R[: j + 2, j] = col
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]

        Rj = R[: j + 1, : j + 1]
        diag = np.abs(np.diag(Rj))
        min_norm = bool(diag.min() <= cfg.rank_tol * diag.max()) if diag.max() > 0 else True
        if min_norm:
            ls = min_norm_lstsq(Hbar[: j + 2, : j + 1], beta * np.eye(j + 2)[0], cfg.rank_tol)
            y, rank = ls.coefficients, ls.numerical_rank
        else:
            y, rank = scipy.linalg.solve_triangular(Rj, g[: j + 1]), j + 1
        x = x0 + Vj @ y
        if cfg.residual_mode == "recursive":
            ls_res = beta * np.eye(j + 2)[0] - Hbar[: j + 2, : j + 1] @ y
            r = -(V[:, : j + 2] @ ls_res)
        else:
            r = problem.residual(x)
        trace.record(x, r, y, rank, min_norm)
        if breakdown:
            trace.extras["arnoldi_breakdown"] = j + 1
            if not mon.done():
                trace.termination = "breakdown"
            return trace
        if mon.done():
            return trace
    if trace.termination is None:
        trace.termination = "max_iter"
    return trace


def ngmres(problem, x0, window: int | None = FULL, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """NGMRES(m) applied to ``q(x) = (I - A) x + b``; ``window=None`` is full NGMRES.

    Each step solves ``min ||M r_k - W_k beta||`` with
    ``W_k = [r_k - M r_k, ..., r_{k-m_k} - M r_k]`` (minimum-norm on rank
    deficiency) and sets
    ``x_{k+1} = q(x_k) + sum_i beta_i (q(x_k) - x_{k-i})``.
    """
    if window is not None and window < 0:
        raise ValueError("window must be nonnegative or FULL")
    trace = _start(problem, x0, "ngmres", window)
    mon = _Monitor(trace, cfg, stagnation=True)
    if mon.initial_done():
        return trace
    state = WindowState(cfg.max_iter if window is None else window)
    x, r = trace.xs[0], trace.residuals[0]
    while True:
        Ar = problem.matvec(r)
        Mr = r - Ar
        state = window_advance(state, r, x, Mr)
        W = state.assemble()
        ls = min_norm_lstsq(W, Mr, cfg.rank_tol)
        beta = ls.coefficients
        q = x - r
        X = np.column_stack(state.iterates)
        x = q + (q[:, None] - X) @ beta
        if cfg.residual_mode == "recursive":
            r = Mr - W @ beta
        else:
            r = problem.residual(x)
        trace.record(x, r, beta, ls.numerical_rank, ls.min_norm_applied)
        if mon.done():
            return trace


def anderson(problem, x0, window: int | None = FULL, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """AA(m): ``x_{k+1} = q(x_k) + sum_{i>=1} gamma_i (q(x_k) - q(x_{k-i}))``.

    ``gamma`` minimizes ``||r_k + sum_i gamma_i (r_k - r_{k-i})||``. In
    recursive mode the next residual is ``M (r_k + sum_i gamma_i (r_k - r_{k-i}))``.
    """
    if window is not None and window < 0:
        raise ValueError("window must be nonnegative or FULL")
    trace = _start(problem, x0, "anderson", window)
    mon = _Monitor(trace, cfg, stagnation=True)
    if mon.initial_done():
        return trace
    keep = (cfg.max_iter if window is None else window) + 1
    xs, rs = [trace.xs[0]], [trace.residuals[0]]
    while True:
        x, r = xs[0], rs[0]
        q = x - r
        if len(rs) > 1:
            Rk = np.column_stack([ri - r for ri in rs[1:]])
            ls = min_norm_lstsq(Rk, r, cfg.rank_tol)
            gamma = ls.coefficients
            Q = np.column_stack([xi - ri for xi, ri in zip(xs[1:], rs[1:])])
            x_new = q + (q[:, None] - Q) @ gamma
            combo = r - Rk @ gamma
            rank, mn = ls.numerical_rank, ls.min_norm_applied
        else:
            gamma, x_new, combo, rank, mn = np.zeros(0), q, r, 0, False
        if cfg.residual_mode == "recursive":
            r_new = combo - problem.matvec(combo)
        else:
            r_new = problem.residual(x_new)
        trace.record(x_new, r_new, gamma, rank, mn)
        xs = [x_new] + xs[: keep - 1]
        rs = [r_new] + rs[: keep - 1]
        if mon.done():
            return trace


def mr_step_length(r, Ar) -> float:
    """``alpha = r^T A r / (A r)^T (A r)``; caller guarantees ``A r != 0``."""
    return float(r @ Ar) / float(Ar @ Ar)


def mr_iteration(problem, x0, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """Minimal residual iteration, i.e. NGMRES(0) or GMRES(1)."""
    trace = _start(problem, x0, "mr", 0)
    mon = _Monitor(trace, cfg, stagnation=True)
    if mon.initial_done():
        return trace
    x, r = trace.xs[0], trace.residuals[0]
    while True:
        Ar = problem.matvec(r)
        if not np.any(Ar):
            trace.termination = "breakdown"
            return trace
        alpha = mr_step_length(r, Ar)
        x = x - alpha * r
        r = r - alpha * Ar if cfg.residual_mode == "recursive" else problem.residual(x)
        trace.record(x, r, [alpha], 1, False)
        if mon.done():
            return trace


def ngmres1_three_term(problem, x0, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """NGMRES(1) as a three-term recurrence driven by a 2x2 normal-equation solve.

    After an MR first step, ``w1 = A r_k`` and ``w2 = A r_k + r_{k-1} - r_k``
    give ``C = [w_i^T w_j]`` and ``f = [w_i^T M r_k]``, and
    ``x_{k+1} = x_k - (1 + b0 + b1) r_k + b1 (x_k - x_{k-1})``.

    ``C`` counts as singular once ``det C <= rank_tol * C11 * C22``; the
    minimum-norm solution is then used and flagged.
    """
    trace = _start(problem, x0, "ngmres1", 1)
    mon = _Monitor(trace, cfg, stagnation=True)
    if mon.initial_done():
        return trace
    cross = trace.extras["cross_term"] = []
    x, r = trace.xs[0], trace.residuals[0]
    Ar = problem.matvec(r)
    if not np.any(Ar):
        trace.termination = "breakdown"
        return trace
    alpha = mr_step_length(r, Ar)
    x_prev, r_prev = x, r
    x = x - alpha * r
    r = r - alpha * Ar if cfg.residual_mode == "recursive" else problem.residual(x)
    trace.record(x, r, [alpha - 1.0], 1, False)
    if mon.done():
        return trace
    while True:
        Ar = problem.matvec(r)
        Mr = r - Ar
        w1 = Ar
        w2 = Ar + r_prev - r
        C = np.array([[w1 @ w1, w1 @ w2], [w1 @ w2, w2 @ w2]])
        f = np.array([w1 @ Mr, w2 @ Mr])
        scale = np.sqrt(abs(r_prev @ r_prev) * (w1 @ w1)) or 1.0
        cross.append(float(r_prev @ Ar) / scale)
        det = C[0, 0] * C[1, 1] - C[0, 1] ** 2
        singular = det <= cfg.rank_tol * C[0, 0] * C[1, 1]
        if singular:
            lam, U = np.linalg.eigh(C)
            keep = lam > cfg.rank_tol * max(lam[-1], 0.0)
            b = U[:, keep] @ ((U[:, keep].T @ f) / lam[keep]) if lam[-1] > 0 else np.zeros(2)
            rank = int(np.count_nonzero(keep)) if lam[-1] > 0 else 0
        else:
            b = np.linalg.solve(C, f)
            rank = 2
        b0, b1 = b
        x_new = x - (1.0 + b0 + b1) * r + b1 * (x - x_prev)
        if cfg.residual_mode == "recursive":
            r_new = Mr - w1 * b0 - w2 * b1
        else:
            r_new = problem.residual(x_new)
        x_prev, r_prev, x, r = x, r, x_new, r_new
        trace.record(x, r, b, rank, bool(singular))
        if mon.done():
            return trace


def conjugate_residual(problem, x0, cfg: SolveConfig = SolveConfig()) -> IterationTrace:
    """Conjugate residual method for symmetric ``A``.

    Works with the classical residual ``s = b - A x`` internally and reuses
    ``A p_{k+1} = A s_{k+1} + beta_k A p_k``. A vanishing ``s^T A s`` with
    ``s != 0`` (possible for indefinite ``A``) ends the solve as a breakdown.
    """
    if getattr(problem, "symmetry_class", "general") != "symmetric":
        raise ValueError("conjugate residual requires a symmetric problem")
    trace = _start(problem, x0, "cr")
    mon = _Monitor(trace, cfg, stagnation=False)
    if mon.initial_done():
        return trace
    x = trace.xs[0]
    s = -trace.residuals[0]
    As = problem.matvec(s)
    p, Ap = s.copy(), As.copy()
    rho = float(s @ As)
    while True:
        ApAp = float(Ap @ Ap)
        if rho == 0.0 or ApAp == 0.0:
            trace.termination = "breakdown"
            return trace
        alpha = rho / ApAp
        x = x + alpha * p
        s = s - alpha * Ap if cfg.residual_mode == "recursive" else problem.b - problem.matvec(x)
        As = problem.matvec(s)
        rho_new = float(s @ As)
        beta = rho_new / rho
        p = s + beta * p
        Ap = As + beta * Ap
        rho = rho_new
        trace.record(x, -s, [alpha, beta], 1, False)
        if mon.done():
            return trace


SOLVERS = {
    "gmres": gmres,
    "ngmres": ngmres,
    "anderson": anderson,
    "mr": mr_iteration,
    "ngmres1": ngmres1_three_term,
    "cr": conjugate_residual,
}
WINDOWED = ("ngmres", "anderson")


def solve(name: str, problem, x0, cfg: SolveConfig = SolveConfig(), window: int | None = FULL):
    """Dispatch by solver name; ``window`` only matters for NGMRES and AA."""
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
    if name in WINDOWED:
        return fn(problem, x0, window, cfg)
    return fn(problem, x0, cfg)
