"""Experiment configuration: a flat ``key = value`` file plus CLI overrides.

Recognised keys (all optional except ``problem``)::

    problem       conv_diffusion | shifted_skew | cyclic_shift | identity | random | matrix
    n             grid points per side (conv_diffusion, shifted_skew) or order
    gamma         mesh Reynolds number in x (default 0.5)
    gamma2        mesh Reynolds number in y (defaults to gamma)
    normalized    true to scale the stencil by h^2 (default true)
    kind          random problem kind (general, positive_real, symmetric, ...)
    matrix        Matrix Market path when problem = matrix
    solvers       comma-separated, e.g. "gmres, ngmres(1), ngmres(full), anderson(3)"
    window        default window for ngmres/anderson entries written without one
    x0            zeros | ones | random
    seed          integer seed for x0 = random and problem = random (default 42)
    tol, max_iter, rank_tol, residual_mode, stagnation_steps
    precondition  none | diagonal
    out           output directory (default "out")

Lines starting with ``#`` or ``;`` are comments. Section headers are allowed
but not required.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..problems import SYMMETRY_CLASSES
from ..solvers import SOLVERS, WINDOWED
from ..trace import SolveConfig

PROBLEMS = ("conv_diffusion", "shifted_skew", "cyclic_shift", "identity", "random", "matrix")
X0_SPECS = ("zeros", "ones", "random")
RANDOM_KINDS = SYMMETRY_CLASSES + ("positive_real",)
_SOLVER_RE = re.compile(r"^\s*([a-z0-9_]+)\s*(?:\(\s*([A-Za-z0-9]+)\s*\))?\s*$")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SolverSpec:
    name: str
    window: int | None = None

    @property
    def label(self) -> str:
        if self.name not in WINDOWED:
            return self.name
        return f"{self.name}_full" if self.window is None else f"{self.name}_{self.window}"

    @property
    def display(self) -> str:
        if self.name not in WINDOWED:
            return self.name
        return f"{self.name}({'full' if self.window is None else self.window})"


def parse_solver(text: str, default_window: int | None = None) -> SolverSpec:
    m = _SOLVER_RE.match(text)
    if not m:
        raise ConfigError("solvers", f"cannot parse solver entry {text!r}")
    name, win = m.group(1), m.group(2)
    if name not in SOLVERS:
        raise ConfigError("solvers", f"unknown solver {name!r}; known: {', '.join(sorted(SOLVERS))}")
    if name not in WINDOWED:
        if win is not None:
            raise ConfigError("solvers", f"{name} takes no window")
        return SolverSpec(name)
    if win is None:
        return SolverSpec(name, default_window)
    if win.lower() == "full":
        return SolverSpec(name, None)
    if not win.isdigit():
        raise ConfigError("solvers", f"window must be a nonnegative integer or 'full', got {win!r}")
    return SolverSpec(name, int(win))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    n: int = 32
    gamma: float = 0.5
    gamma2: float | None = None
    normalized: bool = True
    kind: str = "general"
    matrix: str | None = None
    solvers: tuple = (SolverSpec("gmres"), SolverSpec("ngmres", 1))
    x0: str = "random"
    seed: int = 42
    precondition: str = "none"
    solve: SolveConfig = field(default_factory=SolveConfig)
    out: str = "out"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}; known: {', '.join(PROBLEMS)}")
        if self.problem != "matrix" and self.n < 2:
            raise ConfigError("n", "must be at least 2")
        if self.problem == "matrix" and not self.matrix:
            raise ConfigError("matrix", "required when problem = matrix")
        if self.kind not in RANDOM_KINDS:
            raise ConfigError("kind", f"unknown kind {self.kind!r}")
        if self.x0 not in X0_SPECS:
            raise ConfigError("x0", f"must be one of {', '.join(X0_SPECS)}")
        if self.precondition not in ("none", "diagonal"):
            raise ConfigError("precondition", "must be 'none' or 'diagonal'")
        if not self.solvers:
            raise ConfigError("solvers", "at least one solver is required")
        labels = [s.label for s in self.solvers]
        if len(set(labels)) != len(labels):
            raise ConfigError("solvers", "duplicate solver entries")

    def as_dict(self) -> dict:
        return {
            "problem": self.problem,
            "n": self.n,
            "gamma": self.gamma,
            "gamma2": self.gamma2,
            "normalized": self.normalized,
            "kind": self.kind,
            "matrix": self.matrix,
            "solvers": [s.display for s in self.solvers],
            "x0": self.x0,
            "seed": self.seed,
            "precondition": self.precondition,
            "tol": self.solve.tol,
            "max_iter": self.solve.max_iter,
            "rank_tol": self.solve.rank_tol,
            "residual_mode": self.solve.residual_mode,
            "stagnation_steps": self.solve.stagnation_steps,
            "out": self.out,
        }


def _coerce(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {raw!r}") from None
    return raw


_TYPES = {
    "problem": str, "n": int, "gamma": float, "gamma2": float, "normalized": bool,
    "kind": str, "matrix": str, "solvers": str, "window": str, "x0": str, "seed": int,
    "tol": float, "max_iter": int, "rank_tol": float, "residual_mode": str,
    "stagnation_steps": int, "precondition": str, "out": str,
}
_SOLVE_KEYS = ("tol", "max_iter", "rank_tol", "residual_mode", "stagnation_steps")


def read_config_file(path) -> dict:
    """Parse a config file into a typed dict of the keys it sets."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string("[run]\n" + text if not text.lstrip().startswith("[") else text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _TYPES:
                raise ConfigError(key, "unknown key")
            values[key] = _coerce(key, raw, _TYPES[key])
    return values


def _parse_window(raw) -> int | None:
    if raw is None or (isinstance(raw, str) and raw.lower() == "full"):
        return None
    try:
        w = int(raw)
    except ValueError:
        raise ConfigError("window", f"expected integer or 'full', got {raw!r}") from None
    if w < 0:
        raise ConfigError("window", "must be nonnegative")
    return w


def build_config(values: dict) -> ExperimentConfig:
    """Turn a dict of raw settings (file values merged with flags) into a config."""
    values = {k: v for k, v in values.items() if v is not None}
    if "problem" not in values:
        raise ConfigError("problem", "required")
    window = _parse_window(values.pop("window", 1))
    solvers = values.pop("solvers", "gmres, ngmres")
    entries = solvers if isinstance(solvers, (list, tuple)) else [s for s in solvers.split(",") if s.strip()]
    specs = tuple(parse_solver(s, window) for s in entries)
    try:
        solve = SolveConfig(**{k: values.pop(k) for k in _SOLVE_KEYS if k in values})
    except ValueError as exc:
        raise ConfigError(str(exc).split()[0], str(exc)) from None
    return ExperimentConfig(solvers=specs, solve=solve, **values)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
