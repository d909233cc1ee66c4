"""Run an experiment: build the problem, run every solver, check, write artifacts."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import diagnostics as dg
from ..mmio import read_matrix_market, write_matrix_market
from ..problems import (
    Problem,
    build_cyclic_shift,
    build_identity,
    classify,
    convection_diffusion_from_reynolds,
    initial_guess,
    random_problem,
    to_shifted_skew,
)
from ..solvers import diagonal_preconditioner, left_precondition, solve
from .config import ExperimentConfig
from .report import convergence_svg

CSV_COLUMNS = ("iter", "resnorm", "rank", "min_norm_flag", "termination")
EQUIVALENCE_TOL = 1e-8
EQUIVALENCE_FLOOR = 1e-8
ORTHOGONALITY_TOL = 1e-9


def fmt_float(x: float) -> str:
    """Round-trip formatting (17 significant digits)."""
    return format(float(x), ".17g")


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_problem(cfg: ExperimentConfig):
    """Problem object described by ``cfg`` (optionally left-preconditioned)."""
    if cfg.problem == "conv_diffusion":
        prob = convection_diffusion_from_reynolds(cfg.n, cfg.gamma, cfg.gamma2, cfg.normalized)
    elif cfg.problem == "shifted_skew":
        K = convection_diffusion_from_reynolds(cfg.n, cfg.gamma, cfg.gamma2, cfg.normalized)
        prob = to_shifted_skew(K)
    elif cfg.problem == "cyclic_shift":
        prob = build_cyclic_shift(cfg.n)
    elif cfg.problem == "identity":
        prob = build_identity(cfg.n)
    elif cfg.problem == "random":
        prob = random_problem(cfg.n, cfg.kind, np.random.default_rng(cfg.seed))
    else:
        A = read_matrix_market(cfg.matrix)
        n = A.shape[0]
        ones = np.ones(n)
        prob = Problem(A, A @ ones, classify(A), Path(cfg.matrix).stem, x_star=ones)
    if cfg.precondition == "diagonal":
        prob = left_precondition(prob, diagonal_preconditioner(prob))
    return prob


@dataclass
class CheckResult:
    name: str
    passed: bool
    asserted: bool
    detail: str = ""


@dataclass
class RunArtifact:
    config: ExperimentConfig
    traces: dict
    checks: list = field(default_factory=list)
    divergence: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    last = len(trace) - 1
    for k in range(len(trace)):
        w.writerow([
            k,
            fmt_float(trace.resnorms[k]),
            trace.ranks[k],
            int(trace.min_norm[k]),
            trace.termination if k == last else "",
        ])
    return buf.getvalue()


def read_trace_csv(path) -> dict:
    """Columns of a trace CSV as lists (resnorm parsed as float)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "iter": [int(r["iter"]) for r in rows],
        "resnorm": [float(r["resnorm"]) for r in rows],
        "rank": [int(r["rank"]) for r in rows],
        "min_norm_flag": [int(r["min_norm_flag"]) for r in rows],
        "termination": [r["termination"] for r in rows],
    }


def comparison_csv(labels, traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter"] + list(labels))
    depth = max(len(t) for t in traces)
    for k in range(depth):
        w.writerow([k] + [fmt_float(t.relative_resnorms()[k]) if k < len(t) else "" for t in traces])
    return buf.getvalue()


def _run_checks(problem, specs, traces) -> tuple[list, dict]:
    checks, divergence = [], {}
    gm = next((traces[s.label] for s in specs if s.name == "gmres"), None)
    cls = getattr(problem, "symmetry_class", "general")
    short_recurrence = cls in ("symmetric", "shifted_skew_symmetric")
    for s in specs:
        tr = traces[s.label]
        if s.name in ("ngmres", "ngmres1", "mr", "gmres", "cr"):
            ok = dg.residuals_monotone(tr)
            # GMRES and CR are monotone by construction; the accelerators only in
            # exact arithmetic, so for them the result is reported, not asserted.
            checks.append(CheckResult(f"{s.display}: residual monotonicity", ok, s.name in ("gmres", "cr")))
        if s.name in ("ngmres", "ngmres1"):
            rep = dg.check_orthogonality(tr, problem, tol=ORTHOGONALITY_TOL)
            checks.append(CheckResult(
                f"{s.display}: orthogonality", rep.passed, False, f"worst scaled defect {rep.worst:.3e}"
            ))
        if gm is None or s.name == "gmres":
            continue
        divergence[s.display] = dg.compare_traces(tr, gm, EQUIVALENCE_TOL, floor=EQUIVALENCE_FLOOR)
        full = s.window is None and s.name in ("ngmres", "anderson")
        windowed = s.name in ("ngmres1",) or (s.name == "ngmres" and s.window is not None and s.window >= 1)
        if full or (windowed and short_recurrence) or s.name == "cr":
            eq = dg.check_equivalence(tr, gm, EQUIVALENCE_TOL, EQUIVALENCE_FLOOR)
            detail = (
                f"horizon {eq.horizon}, max gap {eq.max_gap:.3e}"
                if eq.hypothesis_met
                else f"strict-decrease horizon {eq.horizon}, nothing beyond x_1 to compare"
            )
            if s.name == "anderson":
                checks.append(CheckResult(f"{s.display}: AA/GMRES step relation", _aa_relation(tr, gm, eq.horizon), True, detail))
            else:
                checks.append(CheckResult(f"{s.display}: GMRES equivalence", eq.passed, True, detail))
    return checks, divergence


def _aa_relation(aa, gm, horizon: int, tol: float = EQUIVALENCE_TOL) -> bool:
    """``x_{j+1}^AA = x_j^G - r_j^G`` for ``j < horizon`` (relative to ``||x_j^G|| + ||r_0||``)."""
    last = min(horizon, len(aa) - 1, len(gm))
    for j in range(last):
        target = gm.xs[j] - gm.residuals[j]
        scale = np.linalg.norm(gm.xs[j]) + gm.r0_norm
        if gm.resnorms[j] <= EQUIVALENCE_FLOOR * gm.r0_norm:
            break
        if np.linalg.norm(aa.xs[j + 1] - target) > tol * scale:
            return False
    return True


def summary_text(art: RunArtifact, problem) -> str:
    cfg = art.config
    lines = [
        f"problem: {getattr(problem, 'label', cfg.problem)} (n = {problem.n}, class {getattr(problem, 'symmetry_class', 'general')})",
        f"x0: {cfg.x0} (seed {cfg.seed})",
        f"tol {fmt_float(cfg.solve.tol)}, max_iter {cfg.solve.max_iter}, residual_mode {cfg.solve.residual_mode}",
        "",
        "solver            iters  final ||r||/||r0||      termination",
    ]
    for spec in cfg.solvers:
        tr = art.traces[spec.label]
        lines.append(f"{spec.display:<17} {tr.iterations:>5}  {tr.relative_resnorms()[-1]:<22.6e} {tr.termination}")
    if art.divergence:
        lines += ["", f"divergence from GMRES (tol {EQUIVALENCE_TOL:g}, floor {EQUIVALENCE_FLOOR:g}):"]
        for name, idx in art.divergence.items():
            lines.append(f"  {name}: {'NONE' if idx is None else idx}")
    lines += ["", "checks:"]
    for c in art.checks:
        tag = "PASS" if c.passed else ("FAIL" if c.asserted else "info")
        lines.append(f"  [{tag}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
    lines += ["", f"verdict: {'PASS' if art.passed else 'FAIL'}"]
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, write: bool = True) -> RunArtifact:
    """Execute ``cfg``; with ``write`` the artifacts go to ``cfg.out``."""
    problem = build_problem(cfg)
    x0 = initial_guess(cfg.x0, problem.n, cfg.seed)
    traces = {s.label: solve(s.name, problem, x0, cfg.solve, s.window) for s in cfg.solvers}
    checks, divergence = _run_checks(problem, cfg.solvers, traces)
    art = RunArtifact(cfg, traces, checks, divergence)
    if not write:
        return art
    out = Path(cfg.out)
    for s in cfg.solvers:
        path = out / f"{s.label}.csv"
        atomic_write(path, trace_csv(traces[s.label]))
        art.files[s.label] = path
    labels = [s.display for s in cfg.solvers]
    ordered = [traces[s.label] for s in cfg.solvers]
    art.files["comparison"] = out / "comparison.csv"
    atomic_write(art.files["comparison"], comparison_csv(labels, ordered))
    art.files["plot"] = out / "convergence.svg"
    series = {lab: t.relative_resnorms() for lab, t in zip(labels, ordered)}
    atomic_write(art.files["plot"], convergence_svg(series, getattr(problem, "label", cfg.problem)))
    art.files["summary"] = out / "summary.txt"
    atomic_write(art.files["summary"], summary_text(art, problem))
    art.files["traces"] = out / "traces.npz"
    buf = io.BytesIO()
    np.savez(buf, **{f"{s.label}__{kind}": np.array(getattr(traces[s.label], kind))
                     for s in cfg.solvers for kind in ("xs", "residuals")})
    atomic_write(art.files["traces"], buf.getvalue())
    meta = {
        "config": cfg.as_dict(),
        "verdict": "pass" if art.passed else "fail",
        "divergence": {k: v for k, v in divergence.items()},
        "checks": [{"name": c.name, "passed": c.passed, "asserted": c.asserted, "detail": c.detail} for c in checks],
    }
    art.files["run"] = out / "run.json"
    atomic_write(art.files["run"], json.dumps(meta, indent=2) + "\n")
    if hasattr(problem, "A"):
        art.files["matrix"] = out / "problem.mtx"
        fd, tmp = tempfile.mkstemp(dir=out, suffix=".mtx")
        os.close(fd)
        write_matrix_market(tmp, problem.A, comment=getattr(problem, "label", ""))
        os.replace(tmp, art.files["matrix"])
    return art


def check_traces(run_dir, problem=None) -> list:
    """Re-run diagnostics on traces stored by :func:`run`.

    Reads ``run.json`` and ``traces.npz`` from ``run_dir``, rebuilds the
    problem from the stored config and returns the list of checks.
    """
    from ..trace import IterationTrace
    from .config import build_config

    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    raw = dict(meta["config"])
    cfg = build_config(raw)
    if problem is None:
        problem = build_problem(cfg)
    data = np.load(run_dir / "traces.npz")
    traces = {}
    for s in cfg.solvers:
        tr = IterationTrace(s.name, s.window)
        xs, rs = data[f"{s.label}__xs"], data[f"{s.label}__residuals"]
        for x, r in zip(xs, rs):
            tr.record(x, r)
        csv_cols = read_trace_csv(run_dir / f"{s.label}.csv")
        tr.termination = csv_cols["termination"][-1]
        traces[s.label] = tr
    checks, _ = _run_checks(problem, cfg.solvers, traces)
    return checks
