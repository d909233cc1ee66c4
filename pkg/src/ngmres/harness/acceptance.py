"""Acceptance suite: every headline claim of the package, checked end to end.

Each criterion is a function returning a :class:`CriterionResult`; a failure
is a verdict, never an exception. :func:`run_acceptance_suite` runs them all
and prints one line per criterion with its timing.
"""

from __future__ import annotations

import sys
import time
import traceback
from dataclasses import dataclass

import numpy as np

from .. import diagnostics as dg
from .. import solvers as sv
from ..problems import (
    build_convection_diffusion,
    build_cyclic_shift,
    convection_diffusion_from_reynolds,
    initial_guess,
    random_problem,
    to_shifted_skew,
)
from ..trace import SolveConfig

FULL = sv.FULL
RANDOM_KINDS = ("general", "positive_real", "symmetric", "shifted_skew_symmetric", "skew_symmetric")


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.2f}s): {self.detail}"


def _rel_gap(a, b, floor=None) -> float:
    return dg.max_residual_gap(a, b, floor=floor)


# -- individual criteria ----------------------------------------------------


def shifted_skew_equivalence(seed: int = 42):
    """NGMRES(1) and full NGMRES reproduce GMRES on a shifted skew-symmetric
    convection-diffusion system above the ``1e-8`` floor."""
    K = convection_diffusion_from_reynolds(32, 0.5, normalized=True)
    prob = to_shifted_skew(K)
    x0 = initial_guess("random", prob.n, seed)
    cfg = SolveConfig(max_iter=400, tol=1e-12)
    g = sv.gmres(prob, x0, cfg)
    n1 = sv.ngmres(prob, x0, 1, cfg)
    nf = sv.ngmres(prob, x0, FULL, cfg)
    gap1 = _rel_gap(n1, g, floor=1e-8)
    gapf = _rel_gap(nf, g, floor=1e-8)
    ok = gap1 <= 1e-8 and gapf <= 1e-8
    return ok, f"max gap NGMRES(1) {gap1:.2e}, full {gapf:.2e} (GMRES {g.iterations} its)"


def nonsymmetric_divergence():
    """The same convection-diffusion matrix used directly: NGMRES(1) departs
    from GMRES, and GMRES stays below it at every step."""
    K = convection_diffusion_from_reynolds(32, 0.5, normalized=True)
    x0 = initial_guess("random", K.n, 42)
    cfg = SolveConfig(max_iter=400, tol=1e-12)
    g = sv.gmres(K, x0, cfg)
    n1 = sv.ngmres(K, x0, 1, cfg)
    div = dg.compare_traces(n1, g, 1e-8)
    common = min(len(g), len(n1))
    slack = 1e-10 * g.r0_norm
    below = all(g.resnorms[k] <= n1.resnorms[k] + slack for k in range(common))
    return div is not None and below, f"divergence index {div}, GMRES <= NGMRES(1) everywhere: {below}"


def cyclic_stagnation():
    """Cyclic shift of order 5: GMRES stalls four steps then solves exactly;
    full NGMRES and NGMRES(0) stay at ``x_0 = 0``; from ``x_0 = ones`` full NGMRES
    and GMRES coincide and both solve at iteration 5."""
    prob = build_cyclic_shift(5)
    x0 = np.zeros(5)
    e5 = prob.x_star
    g = sv.gmres(prob, x0, SolveConfig(max_iter=10, tol=1e-14))
    ok_g = len(g) >= 6 and all(np.abs(g.xs[k] - x0).max() <= 1e-12 for k in range(1, 5))
    ok_g = bool(ok_g and np.abs(g.xs[5] - e5).max() <= 1e-12)
    nocut = SolveConfig(max_iter=10, tol=1e-14, stagnation_steps=0)
    stuck = []
    for window in (FULL, 0):
        t = sv.ngmres(prob, x0, window, nocut)
        stuck.append(bool(len(t) == 11 and max(np.abs(x - x0).max() for x in t.xs) <= 1e-12))
    ones = np.ones(5)
    g1 = sv.gmres(prob, ones, SolveConfig(max_iter=10, tol=1e-14))
    n1 = sv.ngmres(prob, ones, FULL, SolveConfig(max_iter=10, tol=1e-14))
    div = dg.compare_traces(n1, g1, 1e-10)
    reach = bool(
        len(g1) >= 6 and len(n1) >= 6
        and np.abs(g1.xs[5] - e5).max() <= 1e-12 and np.abs(n1.xs[5] - e5).max() <= 1e-12
    )
    ok = ok_g and all(stuck) and div is None and reach
    return ok, (
        f"GMRES stall+exact: {ok_g}, NGMRES(full)/NGMRES(0) stuck at x0: {stuck}, "
        f"x0=ones divergence {div}, both exact at 5: {reach}"
    )


def cyclic_window_stall():
    """Cyclic shift of order 50 from ones: NGMRES(10) matches GMRES for
    exactly 11 steps, then stalls while GMRES solves at iteration 50."""
    prob = build_cyclic_shift(50)
    x0 = np.ones(50)
    g = sv.gmres(prob, x0, SolveConfig(max_iter=50, tol=1e-12))
    ng = sv.ngmres(prob, x0, 10, SolveConfig(max_iter=50, tol=1e-14, stagnation_steps=0))
    div = dg.compare_traces(ng, g, 1e-10)
    g_final = g.relative_resnorms()[-1]
    ng50 = ng.relative_resnorms()[50] if len(ng) > 50 else float("nan")
    ok = div == 11 and g.iterations == 50 and g_final <= 1e-12 and ng50 > 1e-3
    return ok, f"divergence {div}, GMRES {g.iterations} its to {g_final:.1e}, NGMRES(10) at 50: {ng50:.3e}"


def symmetric_triple_equivalence():
    """SPD Laplacian, 64 unknowns: GMRES, NGMRES(1), full NGMRES and CR agree
    pairwise in residual norm, and the Chebyshev bound holds at every step."""
    prob = build_convection_diffusion(8, 0.0, 0.0)
    x0 = np.zeros(prob.n)
    cfg = SolveConfig(max_iter=200, tol=1e-11)
    traces = {
        "gmres": sv.gmres(prob, x0, cfg),
        "ngmres(1)": sv.ngmres(prob, x0, 1, cfg),
        "ngmres(full)": sv.ngmres(prob, x0, FULL, cfg),
        "cr": sv.conjugate_residual(prob, x0, cfg),
    }
    worst = 0.0
    names = list(traces)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            ra, rb = traces[a].relative_resnorms(), traces[b].relative_resnorms()
            for k in range(min(len(ra), len(rb))):
                if min(ra[k], rb[k]) <= 1e-10:
                    break
                worst = max(worst, abs(ra[k] - rb[k]))
    rep = dg.compute_bounds(prob)
    cheb = {n: dg.check_contraction(t, rep)["chebyshev"].status for n, t in traces.items()}
    ok = worst <= 1e-8 and all(s == "pass" for s in cheb.values())
    return ok, f"max pairwise gap {worst:.2e}, Chebyshev: {cheb}"


def positive_real_contraction(count: int = 100, n: int = 50):
    """Seeded positive-real matrices: every MR and NGMRES(m) step contracts by
    at least the two spectral factors."""
    cfg = SolveConfig(max_iter=100, tol=1e-10)
    failures = []
    nu_checked = 0
    for seed in range(count):
        rng = np.random.default_rng(seed)
        prob = random_problem(n, "positive_real", rng, mu=0.1)
        x0 = rng.uniform(-1.0, 1.0, n)
        rep = dg.compute_bounds(prob)
        nu_checked += rep.factor_mu_nu is not None
        runs = [("mr", sv.mr_iteration(prob, x0, cfg))]
        runs += [(f"ngmres({m})", sv.ngmres(prob, x0, m, cfg)) for m in (0, 1, 5)]
        for name, tr in runs:
            res = dg.check_contraction(tr, rep)
            for key in ("mu_sigma", "mu_nu"):
                if res[key].status == "fail":
                    failures.append((seed, name, key))
            if res["mu_sigma"].status == "not-applicable":
                failures.append((seed, name, "hypothesis"))
    return not failures, f"{count} problems, nu defined on {nu_checked}, failures: {failures[:5]}"


def _paper_example_traces():
    """NGMRES traces from the worked examples, with their problems."""
    out = []
    K = convection_diffusion_from_reynolds(32, 0.5, normalized=True)
    S = to_shifted_skew(K)
    x0 = initial_guess("random", K.n, 42)
    cfg = SolveConfig(max_iter=400, tol=1e-12)
    for prob, tag in ((S, "shifted-skew"), (K, "convection-diffusion")):
        for m in (1, FULL):
            out.append((f"{tag} NGMRES({'full' if m is None else m})", prob, sv.ngmres(prob, x0, m, cfg)))
    c5 = build_cyclic_shift(5)
    nocut = SolveConfig(max_iter=10, tol=1e-14, stagnation_steps=0)
    for start in ("zeros", "ones"):
        out.append((f"cyclic-5 x0={start}", c5, sv.ngmres(c5, initial_guess(start, 5), FULL, nocut)))
    c50 = build_cyclic_shift(50)
    out.append(("cyclic-50 NGMRES(10)", c50, sv.ngmres(c50, np.ones(50), 10, SolveConfig(max_iter=50, tol=1e-14, stagnation_steps=0))))
    return out


def orthogonality_suite(count: int = 100, n: int = 30):
    """Orthogonality relations and monotonicity on random problems across
    symmetry classes and on the worked examples."""
    cfg = SolveConfig(max_iter=2 * n, tol=1e-10)
    bad = []
    total = 0
    for seed in range(count):
        rng = np.random.default_rng(seed)
        kind = RANDOM_KINDS[seed % len(RANDOM_KINDS)]
        prob = random_problem(n, kind, rng)
        x0 = rng.uniform(-1.0, 1.0, n)
        for m in (0, 1, 2, 5, FULL):
            tr = sv.ngmres(prob, x0, m, cfg)
            rep = dg.check_orthogonality(tr, prob, tol=1e-9)
            total += 1
            if not rep.passed or not dg.residuals_monotone(tr):
                bad.append(f"seed {seed} {kind} m={m} defect {rep.worst:.1e}")
    for name, prob, tr in _paper_example_traces():
        rep = dg.check_orthogonality(tr, prob, tol=1e-9)
        total += 1
        if not rep.passed or not dg.residuals_monotone(tr):
            bad.append(f"{name} defect {rep.worst:.1e}")
    return not bad, f"{total - len(bad)}/{total} traces pass" + (f"; e.g. {bad[:4]}" if bad else "")


def krylov_oracle_norms(prob, x0, steps: int) -> np.ndarray:
    """``min ||r_0 + A K_k y||`` by dense least squares on an explicit
    (column-normalized) Krylov basis, for ``k = 0 .. steps``."""
    A = prob.dense()
    r0 = prob.residual(x0)
    cols, v = [], r0.copy()
    out = [np.linalg.norm(r0)]
    for _ in range(steps):
        cols.append(v / np.linalg.norm(v))
        B = A @ np.column_stack(cols)
        y, *_ = np.linalg.lstsq(B, -r0, rcond=None)
        out.append(np.linalg.norm(r0 + B @ y))
        v = A @ cols[-1]
    return np.array(out)


def gmres_oracle_equivalence(count: int = 20, n: int = 8):
    """GMRES against the explicit Krylov oracle, full NGMRES against GMRES,
    and the AA/GMRES one-step relation, on small dense systems."""
    cfg = SolveConfig(max_iter=n, tol=1e-13)
    worst_oracle = worst_ng = worst_aa = 0.0
    checked = 0
    for seed in range(count):
        rng = np.random.default_rng(1000 + seed)
        prob = random_problem(n, "general", rng)
        x0 = rng.uniform(-1.0, 1.0, n)
        g = sv.gmres(prob, x0, cfg)
        oracle = krylov_oracle_norms(prob, x0, g.iterations)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(g.resnorm_array() - oracle))) / g.r0_norm)
        eq = dg.check_equivalence(sv.ngmres(prob, x0, FULL, cfg), g, 1e-8, floor=None)
        if eq.hypothesis_met:
            checked += 1
            worst_ng = max(worst_ng, eq.max_gap)
        aa = sv.anderson(prob, x0, FULL, cfg)
        for j in range(min(eq.horizon, len(aa) - 1, len(g))):
            target = g.xs[j] - g.residuals[j]
            scale = np.linalg.norm(g.xs[j]) + g.r0_norm
            worst_aa = max(worst_aa, float(np.linalg.norm(aa.xs[j + 1] - target)) / scale)
    ok = worst_oracle <= 1e-9 and worst_ng <= 1e-8 and worst_aa <= 1e-8
    return ok, (
        f"GMRES vs oracle {worst_oracle:.1e}, full NGMRES vs GMRES {worst_ng:.1e} "
        f"({checked}/{count} with hypothesis), AA relation {worst_aa:.1e}"
    )


def polynomial_reconstruction():
    """Residual polynomials rebuild every residual, and ``p_k(1) = 1``."""
    cfg = SolveConfig(max_iter=20, tol=1e-14, stagnation_steps=0)
    problems = [build_convection_diffusion(8, 0.0, 0.0), convection_diffusion_from_reynolds(8, 0.5, normalized=True)]
    for seed, n in enumerate((6, 16, 32, 64, 12, 24, 48, 40)):
        rng = np.random.default_rng(2000 + seed)
        problems.append(random_problem(n, RANDOM_KINDS[seed % len(RANDOM_KINDS)], rng))
    worst_rec = worst_one = 0.0
    for idx, prob in enumerate(problems):
        x0 = initial_guess("random", prob.n, 3000 + idx)
        for m in (0, 1, 2, FULL):
            tr = sv.ngmres(prob, x0, m, cfg)
            pt = dg.track_polynomial(tr)
            worst_rec = max(worst_rec, float(dg.polynomial_reconstruction_errors(pt, tr, prob).max()))
            worst_one = max(worst_one, float(np.abs(pt.values_at_one() - 1.0).max()))
    ok = worst_rec <= 1e-8 and worst_one <= 1e-10
    return ok, f"{len(problems)} problems, reconstruction {worst_rec:.1e}, |p(1)-1| {worst_one:.1e}"


def preconditioned_equivalence():
    """Diagonal left preconditioning: full NGMRES on ``P^{-1}A`` matches GMRES on
    ``P^{-1}A``; the identity preconditioner reproduces unpreconditioned traces bit for bit."""
    base = convection_diffusion_from_reynolds(8, 0.5, normalized=True)
    x0 = initial_guess("random", base.n, 7)
    cfg = SolveConfig(max_iter=200, tol=1e-12)
    pp = sv.left_precondition(base, sv.diagonal_preconditioner(base))
    eq = dg.check_equivalence(sv.ngmres(pp, x0, FULL, cfg), sv.gmres(pp, x0, cfg), 1e-8, floor=1e-8)
    ident = sv.left_precondition(base, lambda v: v)
    same = True
    for name, window in (("gmres", None), ("ngmres", FULL), ("ngmres", 1)):
        a = sv.solve(name, base, x0, cfg, window)
        b = sv.solve(name, ident, x0, cfg, window)
        same &= len(a) == len(b) and all(np.array_equal(p, q) for p, q in zip(a.residuals, b.residuals))
    ok = eq.hypothesis_met and eq.passed and eq.max_gap <= 1e-8 and same
    return ok, f"gap {eq.max_gap:.1e} over {eq.horizon} steps, P=I bit-identical: {same}"


def first_step_universality():
    """Every NGMRES-family method (and GMRES) takes the same first step,
    ``x_1 = x_0 - alpha_0 r_0`` with the minimal-residual step length."""
    rng = np.random.default_rng(77)
    worst = 0.0
    for kind in ("general", "positive_real", "symmetric", "shifted_skew_symmetric"):
        prob = random_problem(12, kind, rng)
        x0 = rng.uniform(-1.0, 1.0, 12)
        r0 = prob.residual(x0)
        Ar0 = prob.matvec(r0)
        alpha = float(r0 @ Ar0) / float(Ar0 @ Ar0)
        expected = x0 - alpha * r0
        cfg = SolveConfig(max_iter=1)
        firsts = [sv.gmres(prob, x0, cfg), sv.mr_iteration(prob, x0, cfg), sv.ngmres1_three_term(prob, x0, cfg)]
        firsts += [sv.ngmres(prob, x0, m, cfg) for m in (0, 1, 2, FULL)]
        for tr in firsts:
            worst = max(worst, float(np.linalg.norm(tr.xs[1] - expected)) / (np.linalg.norm(expected) or 1.0))
    return worst <= 1e-12, f"max first-step deviation {worst:.1e}"


CRITERIA = (
    ("1 shifted-skew equivalence", shifted_skew_equivalence),
    ("2 nonsymmetric divergence", nonsymmetric_divergence),
    ("3 cyclic shift n=5 stagnation", cyclic_stagnation),
    ("4 cyclic shift n=50 window stall", cyclic_window_stall),
    ("5 symmetric triple equivalence", symmetric_triple_equivalence),
    ("6 positive-real contraction", positive_real_contraction),
    ("7 orthogonality suite", orthogonality_suite),
    ("8 GMRES oracle equivalence", gmres_oracle_equivalence),
    ("9 polynomial reconstruction", polynomial_reconstruction),
    ("10 preconditioned equivalence", preconditioned_equivalence),
    ("first-step universality", first_step_universality),
)


def run_criterion(name, fn) -> CriterionResult:
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed verdict, not an aborted suite
        ok, detail = False, f"error: {exc!r}\n{traceback.format_exc(limit=3)}"
    return CriterionResult(name, bool(ok), detail, time.perf_counter() - start)


def run_acceptance_suite(only=None, stream="stdout") -> list[CriterionResult]:
    """Run the criteria (all, or those selected by number or name prefix in
    ``only``) and print one verdict line each plus a total.

    ``stream`` defaults to the current ``sys.stdout``; pass ``None`` to stay quiet.
    """
    if stream == "stdout":
        stream = sys.stdout
    results = []
    for name, fn in CRITERIA:
        if only and not any(name.split()[0] == str(o) or name.startswith(str(o)) for o in only):
            continue
        res = run_criterion(name, fn)
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    if stream is not None:
        passed = sum(r.passed for r in results)
        total = sum(r.seconds for r in results)
        print(f"{passed}/{len(results)} criteria passed in {total:.1f}s", file=stream)
    return results
