"""Command line: ``run``, ``check``, ``accept`` and ``generate``.

Exit codes: 0 when every asserted check passes, 1 when one fails, 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..mmio import MatrixMarketError, write_matrix_market
from .acceptance import run_acceptance_suite
from .config import PROBLEMS, RANDOM_KINDS, ConfigError, build_config, read_config_file
from .runner import build_problem, check_traces, run

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file; flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--n", type=int, help="grid points per side, or matrix order")
    p.add_argument("--gamma", type=float, help="mesh Reynolds number (x direction)")
    p.add_argument("--gamma2", type=float, help="mesh Reynolds number (y direction)")
    p.add_argument(
        "--normalized", choices=("true", "false"), help="scale the stencil by h^2 (default true)"
    )
    p.add_argument("--kind", choices=RANDOM_KINDS, help="random problem kind")
    p.add_argument("--matrix", help="Matrix Market file for --problem matrix")
    p.add_argument("--seed", type=int)
    p.add_argument("--precondition", choices=("none", "diagonal"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngmres-harness", description="Run NGMRES/GMRES/AA experiments and checks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write artifacts")
    _problem_flags(p_run)
    p_run.add_argument(
        "--solver", action="append", dest="solvers",
        help="solver entry such as gmres, ngmres(1), ngmres(full), anderson(2); repeatable",
    )
    p_run.add_argument("--window", help="window for --solver entries given without one (integer or 'full')")
    p_run.add_argument("--x0", choices=("zeros", "ones", "random"))
    p_run.add_argument("--tol", type=float)
    p_run.add_argument("--max-iter", type=int, dest="max_iter")
    p_run.add_argument("--rank-tol", type=float, dest="rank_tol")
    p_run.add_argument("--residual-mode", choices=("explicit", "recursive"), dest="residual_mode")
    p_run.add_argument("--stagnation-steps", type=int, dest="stagnation_steps")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--quiet", action="store_true", help="do not print the summary")

    p_check = sub.add_parser("check", help="re-run diagnostics on a stored run directory")
    p_check.add_argument("run_dir", type=Path)

    p_acc = sub.add_parser("accept", help="run the acceptance suite")
    p_acc.add_argument("criteria", nargs="*", help="criterion numbers or name prefixes (default: all)")

    p_gen = sub.add_parser("generate", help="write a problem matrix to Matrix Market")
    _problem_flags(p_gen)
    p_gen.add_argument("--output", "-o", required=True, type=Path)
    return parser


_CONFIG_FLAGS = (
    "problem", "n", "gamma", "gamma2", "normalized", "kind", "matrix", "seed", "precondition",
    "solvers", "window", "x0", "tol", "max_iter", "rank_tol", "residual_mode",
    "stagnation_steps", "out",
)


def _gather(args) -> dict:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_FLAGS:
        val = getattr(args, key, None)
        if val is None:
            continue
        if key == "normalized":
            val = val == "true"
        values[key] = val
    return values


def _cmd_run(args) -> int:
    cfg = build_config(_gather(args))
    art = run(cfg)
    if not args.quiet:
        print(art.files["summary"].read_text(), end="")
        print(f"artifacts written to {cfg.out}")
    return art.exit_code


def _cmd_check(args) -> int:
    if not (args.run_dir / "run.json").exists():
        print(f"error: {args.run_dir} has no run.json", file=sys.stderr)
        return EXIT_USAGE
    checks = check_traces(args.run_dir)
    for c in checks:
        tag = "PASS" if c.passed else ("FAIL" if c.asserted else "info")
        print(f"[{tag}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
    return EXIT_OK if all(c.passed for c in checks if c.asserted) else EXIT_CHECK_FAILED


def _cmd_accept(args) -> int:
    results = run_acceptance_suite(args.criteria or None)
    if not results:
        print("error: no criterion matches the selection", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def _cmd_generate(args) -> int:
    values = _gather(args)
    values.setdefault("x0", "zeros")
    cfg = build_config(values)
    problem = build_problem(cfg)
    A = getattr(problem, "A", None)
    if A is None:
        A = problem.dense()
    write_matrix_market(args.output, A, comment=getattr(problem, "label", ""))
    print(f"wrote {A.shape[0]}x{A.shape[1]} matrix to {args.output}")
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "check": _cmd_check, "accept": _cmd_accept, "generate": _cmd_generate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, MatrixMarketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
