"""Checks that run on finished traces: orthogonality relations, residual
polynomials, trace comparison, and spectral convergence bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npoly
import scipy.linalg

from .linalg import spectral_norm, spectral_radius, sym_eig_extremes, to_dense
from .problems import symmetry_defect

STRICT_DECREASE_RTOL = 1e-14


def _scaled(num: float, den: float) -> float:
    return abs(num) / den if den > 0 else 0.0


def _dense_of(problem) -> np.ndarray:
    return to_dense(problem.A) if hasattr(problem, "A") else problem.dense()


# -- trace comparison -------------------------------------------------------


def compare_traces(a, b, tol: float, floor: float | None = None, horizon: int | None = None):
    """First step whose residual differs between two traces, or ``None``.

    Residual vectors ``r_j`` are compared relative to ``||r_0||``. The result
    uses step numbering: step ``k`` produces ``x_{k+1}``, so a first mismatch
    in ``r_j`` is reported as ``j - 1``. Only the common prefix is compared;
    with ``floor`` set, comparison stops once either relative residual norm
    drops to ``floor``, and ``horizon`` caps the last index compared.
    """
    r0 = a.r0_norm if a.r0_norm > 0 else 1.0
    if np.linalg.norm(a.residuals[0] - b.residuals[0]) > tol * r0:
        raise ValueError("traces do not start from the same initial residual")
    last = min(len(a), len(b)) - 1
    if horizon is not None:
        last = min(last, horizon)
    for j in range(1, last + 1):
        if floor is not None and min(a.resnorms[j], b.resnorms[j]) <= floor * r0:
            return None
        if np.linalg.norm(a.residuals[j] - b.residuals[j]) > tol * r0:
            return j - 1
    return None


def max_residual_gap(a, b, floor: float | None = None, horizon: int | None = None) -> float:
    """``max_j ||r_j^a - r_j^b|| / ||r_0||`` over the compared range."""
    r0 = a.r0_norm if a.r0_norm > 0 else 1.0
    last = min(len(a), len(b)) - 1 if horizon is None else min(len(a) - 1, len(b) - 1, horizon)
    gap = 0.0
    for j in range(last + 1):
        if floor is not None and min(a.resnorms[j], b.resnorms[j]) <= floor * r0:
            break
        gap = max(gap, float(np.linalg.norm(a.residuals[j] - b.residuals[j])) / r0)
    return gap


def strict_decrease_horizon(gmres_trace, rtol: float = STRICT_DECREASE_RTOL) -> int:
    """Largest ``k0`` with ``||r_k|| < ||r_{k-1}|| - rtol ||r_0||`` for ``0 < k < k0``.

    Equivalence statements about full NGMRES, AA and NGMRES(m) hold for
    iterations ``j <= k0``. A value of 1 means GMRES stalled on its first step
    and nothing beyond ``x_1`` is claimed.
    """
    rn = gmres_trace.resnorms
    slack = rtol * rn[0]
    k0 = 1
    while k0 < len(rn) and rn[k0] < rn[k0 - 1] - slack:
        k0 += 1
    return min(k0, len(rn) - 1)


@dataclass
class EquivalenceResult:
    hypothesis_met: bool
    horizon: int
    divergence: int | None
    max_gap: float

    @property
    def passed(self) -> bool:
        """Vacuously true when the strict-decrease hypothesis is not met."""
        return not self.hypothesis_met or self.divergence is None


def check_equivalence(trace, gmres_trace, tol: float = 1e-8, floor: float | None = 1e-8) -> EquivalenceResult:
    """Compare a trace with GMRES up to the strict-decrease horizon."""
    k0 = strict_decrease_horizon(gmres_trace)
    div = compare_traces(trace, gmres_trace, tol, floor=floor, horizon=k0)
    gap = max_residual_gap(trace, gmres_trace, floor=floor, horizon=k0)
    return EquivalenceResult(k0 >= 2, k0, div, gap)


def residuals_monotone(trace, slack: float = 1e-12) -> bool:
    r = trace.resnorm_array()
    return bool(np.all(r[1:] <= r[:-1] + slack * r[0]))


# -- orthogonality ----------------------------------------------------------


@dataclass
class OrthogonalityReport:
    """Scaled orthogonality defects, one entry per step ``k`` (``r_{k+1}`` vs history).

    ``judged[k]`` is False for steps whose ``r_{k+1}`` lies at or below the
    rounding floor; those are reported but never fail.
    """

    tol: float
    cross: np.ndarray  # |r_{k+1}^T A r_k| / (||r_{k+1}|| ||A r_k||)
    differences: np.ndarray  # max_{i,j} |r_{k+1}^T (r_{k-j} - r_{k-i})| / norms
    decrease: np.ndarray  # |r_{k+1}^T (r_{k+1} - r_k)| / norms
    judged: np.ndarray
    applicable: bool = True
    note: str = ""

    @property
    def worst(self) -> float:
        if not np.any(self.judged):
            return 0.0
        stack = np.vstack([self.cross, self.differences, self.decrease])[:, self.judged]
        return float(stack.max())

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.worst <= self.tol

    def failures(self) -> list[int]:
        bad = np.maximum.reduce([self.cross, self.differences, self.decrease]) > self.tol
        return [int(k) for k in np.flatnonzero(bad & self.judged)]


def _window_of(trace, m):
    if m is None:
        m = trace.window
    return m


def rounding_floor(tol: float) -> float:
    """Relative size below which a residual-type vector is treated as rounding.

    Explicit residuals carry absolute error near ``eps ||r_0||``, so an inner
    product against a vector of relative size ``f`` is accurate only to about
    ``eps / f``. Choosing ``f = 10 eps / tol`` keeps that noise a decade below
    ``tol``.
    """
    return 10.0 * np.finfo(float).eps / tol


def _max_pair_defect(v, window_res, vscale, dscale):
    """``max_{i,j} |v^T (w_j - w_i)| / (vscale * max(||w_j - w_i||, dscale))``."""
    worst = 0.0
    dots = [float(v @ w) for w in window_res]
    for j in range(len(window_res)):
        for i in range(j + 1, len(window_res)):
            d = np.linalg.norm(window_res[j] - window_res[i])
            worst = max(worst, _scaled(dots[j] - dots[i], vscale * max(d, dscale)))
    return worst


def check_orthogonality(trace, problem, m: int | None = None, tol: float = 1e-9, floor: float | None = None) -> OrthogonalityReport:
    """Evaluate ``r_{k+1}^T A r_k``, ``r_{k+1}^T (r_{k-j} - r_{k-i})`` and
    ``r_{k+1}^T (r_{k+1} - r_k)`` for ``i, j <= m_k``.

    Each value is divided by the norms of its two factors. Differences of
    residuals enter with norm at least ``floor * ||r_0||`` (stagnating steps
    make them pure rounding), and steps whose ``r_{k+1}`` is below that level
    are reported but not judged. ``floor=None`` uses :func:`rounding_floor`.
    ``m=None`` takes the window recorded on the trace (``None`` there means
    full history, which is also the right setting for GMRES traces).
    """
    m = _window_of(trace, m)
    floor = rounding_floor(tol) if floor is None else floor
    res = trace.residuals
    r0 = trace.r0_norm if trace.r0_norm > 0 else 1.0
    dscale = floor * r0
    K = len(res) - 1
    cross, diffs, dec = np.zeros(K), np.zeros(K), np.zeros(K)
    judged = np.zeros(K, dtype=bool)
    for k in range(K):
        nxt, cur = res[k + 1], res[k]
        nn = np.linalg.norm(nxt)
        Ar = problem.matvec(cur)
        cross[k] = _scaled(nxt @ Ar, nn * np.linalg.norm(Ar))
        mk = k if m is None else min(k, m)
        diffs[k] = _max_pair_defect(nxt, res[k - mk : k + 1], nn, dscale)
        step = nxt - cur
        dec[k] = _scaled(nxt @ step, nn * max(np.linalg.norm(step), dscale))
        judged[k] = nn > dscale
    return OrthogonalityReport(tol, cross, diffs, dec, judged)


def check_aa_orthogonality(trace, problem, m: int | None = None, tol: float = 1e-8, floor: float | None = None) -> OrthogonalityReport:
    """``(M^{-1} r_{k+1})^T (r_{k-j} - r_{k-i}) = 0`` with ``M = I - A``, solved densely.

    Scaling and ``floor`` follow :func:`check_orthogonality`.
    """
    m = _window_of(trace, m)
    floor = rounding_floor(tol) if floor is None else floor
    A = _dense_of(problem)
    n = A.shape[0]
    M = np.eye(n) - A
    K = len(trace.residuals) - 1
    empty = np.zeros(K)
    with warnings.catch_warnings():
        # singularity is detected from the pivots just below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * max(pivots.max(), np.finfo(float).tiny):
        return OrthogonalityReport(tol, empty, empty, empty, np.zeros(K, bool), False, "M = I - A is singular")
    res = trace.residuals
    r0 = trace.r0_norm if trace.r0_norm > 0 else 1.0
    dscale = floor * r0
    diffs, judged = np.zeros(K), np.zeros(K, dtype=bool)
    for k in range(K):
        z = scipy.linalg.lu_solve((lu, piv), res[k + 1])
        mk = k if m is None else min(k, m)
        diffs[k] = _max_pair_defect(z, res[k - mk : k + 1], np.linalg.norm(z), dscale)
        judged[k] = np.linalg.norm(res[k + 1]) > dscale
    return OrthogonalityReport(tol, empty.copy(), diffs, empty.copy(), judged)


def transpose_orthogonality(A, x, y, z) -> tuple[float, float, float]:
    """Scaled ``x^T A (y-z)``, ``x^T (y-z)`` and ``x^T A^T (y-z)``.

    All three share the scale ``||x|| ||A||_2 ||y - z||``. For symmetric or
    shifted skew-symmetric ``A``, the first two being at most ``eps`` forces
    the third below ``3 eps``.
    """
    A = to_dense(A)
    d = np.asarray(y) - np.asarray(z)
    scale = np.linalg.norm(x) * spectral_norm(A) * np.linalg.norm(d)
    return (
        _scaled(x @ (A @ d), scale),
        _scaled(x @ d, scale),
        _scaled(x @ (A.T @ d), scale),
    )


# -- residual polynomials ---------------------------------------------------


@dataclass
class PolynomialTrace:
    """Residual polynomials ``p_0 .. p_K`` of an NGMRES-family trace.

    ``coefficients[k]`` holds the monomial coefficients of ``p_k`` (lowest
    degree first). ``betas[k]`` is the coefficient vector of step ``k``; the
    recurrence itself is used for evaluation because monomial coefficients
    grow large during stagnation and sums over them cancel badly.
    """

    betas: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)

    def __len__(self):
        return len(self.coefficients)

    def values(self, lam: float) -> np.ndarray:
        """``p_k(lam)`` for every ``k``, by the scalar recurrence."""
        vals = [1.0]
        for k, beta in enumerate(self.betas):
            nxt = (1.0 + beta.sum()) * lam * vals[k]
            for i, bi in enumerate(beta):
                nxt -= bi * vals[k - i]
            vals.append(nxt)
        return np.array(vals)

    def values_at_one(self) -> np.ndarray:
        return self.values(1.0)

    def values_at_zero(self) -> np.ndarray:
        """Recorded for inspection; no identity is claimed for these."""
        return self.values(0.0)

    def monomial_at(self, k: int, lam: float) -> float:
        return float(npoly.polyval(lam, self.coefficients[k]))


def ngmres_betas(trace) -> list[np.ndarray]:
    """NGMRES coefficients ``beta^{(k)}`` for ``k = 0 .. K-1`` from any
    NGMRES-family trace (MR steps are converted via ``beta = alpha - 1``)."""
    if trace.method == "mr":
        return [np.array([c[0] - 1.0]) for c in trace.coefficients[1:]]
    if trace.method in ("ngmres", "ngmres1"):
        return [np.asarray(c, dtype=float) for c in trace.coefficients[1:]]
    raise ValueError(f"no NGMRES coefficients on a {trace.method!r} trace")


def track_polynomial(trace) -> PolynomialTrace:
    """Build ``p_k`` from ``p_0 = 1`` and
    ``p_{k+1} = (1 + sum beta) lambda p_k - sum_i beta_i p_{k-i}``."""
    betas = ngmres_betas(trace)
    polys = [np.array([1.0])]
    for k, beta in enumerate(betas):
        nxt = (1.0 + beta.sum()) * npoly.polymulx(polys[k])
        for i, bi in enumerate(beta):
            nxt = npoly.polysub(nxt, bi * polys[k - i])
        polys.append(nxt)
    return PolynomialTrace(betas, polys)


def apply_polynomials(ptrace: PolynomialTrace, problem, v) -> list[np.ndarray]:
    """``[p_0(M) v, p_1(M) v, ...]`` with ``M = I - A``, by the vector recurrence."""
    out = [np.array(v, dtype=float)]
    for k, beta in enumerate(ptrace.betas):
        Mv = out[k] - problem.matvec(out[k])
        nxt = (1.0 + beta.sum()) * Mv
        for i, bi in enumerate(beta):
            nxt = nxt - bi * out[k - i]
        out.append(nxt)
    return out


def apply_monomial(coeffs, problem, v) -> np.ndarray:
    """Evaluate ``p(M) v`` from monomial coefficients by Horner's rule.

    Independent of the recurrence, and reliable while the coefficients stay
    moderate.
    """
    out = coeffs[-1] * v
    for c in coeffs[-2::-1]:
        out = (out - problem.matvec(out)) + c * v
    return out


def polynomial_reconstruction_errors(ptrace: PolynomialTrace, trace, problem) -> np.ndarray:
    """``||p_k(M) r_0 - r_k|| / ||r_0||`` for each recorded iterate."""
    r0 = trace.residuals[0]
    scale = np.linalg.norm(r0) or 1.0
    vecs = apply_polynomials(ptrace, problem, r0)
    return np.array([np.linalg.norm(v - r) / scale for v, r in zip(vecs, trace.residuals)])


# -- spectral bounds --------------------------------------------------------


@dataclass
class BoundReport:
    """Spectral scalars of ``A`` and the per-step contraction factors they imply.

    Factors are ``None`` when their hypothesis does not hold. The skew factor
    is reported in both readings, ``rho/sqrt(1+rho)`` and
    ``rho/sqrt(1+rho^2)``.
    """

    mu: float
    nu: float | None
    sigma: float
    rho_M: float
    lam_min: float | None = None
    lam_max: float | None = None
    kappa: float | None = None
    positive_real: bool = False
    symmetric_definite: bool = False
    skew_M: bool = False
    factor_mu_sigma: float | None = None
    factor_mu_nu: float | None = None
    factor_symmetric: float | None = None
    chebyshev_base: float | None = None
    factor_skew_printed: float | None = None
    factor_skew_squared: float | None = None
    notes: list = field(default_factory=list)

    def chebyshev_bound(self, k: int) -> float | None:
        """``2 base^k``: bound on ``||r_k|| / ||r_0||``."""
        if self.chebyshev_base is None:
            return None
        return 2.0 * self.chebyshev_base ** k

    def step_factors(self) -> dict:
        """Per-step factors whose hypotheses hold."""
        out = {}
        if self.factor_mu_sigma is not None:
            out["mu_sigma"] = self.factor_mu_sigma
        if self.factor_mu_nu is not None:
            out["mu_nu"] = self.factor_mu_nu
        if self.factor_symmetric is not None:
            out["symmetric"] = self.factor_symmetric
        if self.skew_M:
            out["skew"] = max(self.factor_skew_printed, self.factor_skew_squared)
        return out


def compute_bounds(problem, struct_rtol: float = 1e-12) -> BoundReport:
    """Dense spectral analysis of ``A`` (fine up to a few thousand unknowns)."""
    A = _dense_of(problem)
    n = A.shape[0]
    sym = (A + A.T) / 2
    mu = sym_eig_extremes(sym)[0]
    sigma = spectral_norm(A)
    M = np.eye(n) - A
    rho = spectral_radius(M)
    notes = []
    try:
        Ainv = np.linalg.inv(A)
        if not np.all(np.isfinite(Ainv)) or np.linalg.cond(A) > 1e14:
            raise np.linalg.LinAlgError("ill-conditioned")
        nu = sym_eig_extremes((Ainv + Ainv.T) / 2)[0]
    except np.linalg.LinAlgError:
        nu = None
        notes.append("A is singular: nu undefined")
    rep = BoundReport(mu=mu, nu=nu, sigma=sigma, rho_M=rho, notes=notes)

    if mu > 0:
        rep.positive_real = True
        rep.factor_mu_sigma = float(np.sqrt(max(0.0, 1.0 - mu**2 / sigma**2)))
        if nu is not None and nu > 0:
            rep.factor_mu_nu = float(np.sqrt(max(0.0, 1.0 - mu * nu)))

    if symmetry_defect(A, "symmetric") <= struct_rtol:
        lo, hi = sym_eig_extremes(sym)
        rep.lam_min, rep.lam_max = lo, hi
        if lo > 0 or hi < 0:
            rep.symmetric_definite = True
            rep.factor_symmetric = abs(hi - lo) / abs(hi + lo)
            rep.kappa = hi / lo if lo > 0 else abs(lo / hi)
            s = np.sqrt(rep.kappa)
            rep.chebyshev_base = (s - 1.0) / (s + 1.0)

    if np.linalg.norm(M + M.T) <= struct_rtol * max(np.linalg.norm(M), np.finfo(float).tiny):
        rep.skew_M = True
        rep.factor_skew_printed = rho / np.sqrt(1.0 + rho)
        rep.factor_skew_squared = rho / np.sqrt(1.0 + rho**2)
    return rep


@dataclass
class ContractionResult:
    status: str  # "pass", "fail" or "not-applicable"
    factor: float | None = None
    violations: list = field(default_factory=list)
    worst_ratio: float = 0.0


def check_contraction(trace, report: BoundReport, slack: float = 1e-12) -> dict:
    """Check ``||r_{k+1}|| <= factor ||r_k|| + slack ||r_0||`` for each applicable
    factor, plus the cumulative Chebyshev bound ``2 base^k ||r_0||``.

    Returns a mapping from bound name to :class:`ContractionResult`. For the
    skew case both candidate factors are evaluated; only the looser one is
    asserted, and ``skew_printed``/``skew_squared`` entries record whether each
    candidate bounds the observed steps.
    """
    r = trace.resnorm_array()
    r0 = r[0]
    out = {}
    names = ("mu_sigma", "mu_nu", "symmetric", "skew")
    factors = report.step_factors()
    for name in names:
        if name not in factors:
            out[name] = ContractionResult("not-applicable")
            continue
        fac = factors[name]
        bad = [k for k in range(len(r) - 1) if r[k + 1] > fac * r[k] + slack * r0]
        ratios = r[1:] / np.where(r[:-1] > 0, r[:-1], 1.0)
        out[name] = ContractionResult(
            "fail" if bad else "pass", fac, bad, float(ratios.max()) if ratios.size else 0.0
        )
    if report.skew_M:
        for name, fac in (("skew_printed", report.factor_skew_printed), ("skew_squared", report.factor_skew_squared)):
            bad = [k for k in range(len(r) - 1) if r[k + 1] > fac * r[k] + slack * r0]
            out[name] = ContractionResult("pass" if not bad else "fail", fac, bad)
    if report.chebyshev_base is not None and trace.method in ("ngmres1", "gmres", "cr", "ngmres"):
        bad = [k for k in range(len(r)) if r[k] > report.chebyshev_bound(k) * r0 + slack * r0]
        out["chebyshev"] = ContractionResult("fail" if bad else "pass", report.chebyshev_base, bad)
    else:
        out["chebyshev"] = ContractionResult("not-applicable")
    return out


def contraction_passed(results: dict) -> bool:
    return all(
        res.status != "fail"
        for name, res in results.items()
        if name not in ("skew_printed", "skew_squared")
    )
