"""Solver configuration and per-iteration trace records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DEFAULT_RANK_TOL

TERMINATION_REASONS = ("tolerance", "max_iter", "stagnation", "breakdown")


@dataclass(frozen=True)
class SolveConfig:
    """Stopping rule and inner-solve settings shared by every solver.

    A solve stops once ``||r_k|| <= tol * ||r_0||``. ``stagnation_steps``
    consecutive steps with ``||r_{k+1} - r_k|| <= stagnation_tol * ||r_0||``
    stop the accelerators (never GMRES or CR); 0 disables the test.
    """

    max_iter: int = 200
    tol: float = 1e-10
    rank_tol: float = DEFAULT_RANK_TOL
    residual_mode: str = "explicit"
    stagnation_steps: int = 3
    stagnation_tol: float = 1e-14

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.rank_tol > 0:
            raise ValueError("rank_tol must be positive")
        if self.residual_mode not in ("explicit", "recursive"):
            raise ValueError(f"residual_mode must be 'explicit' or 'recursive', got {self.residual_mode!r}")
        if self.stagnation_steps < 0:
            raise ValueError("stagnation_steps must be nonnegative")


@dataclass
class IterationTrace:
    """Everything a solver produced, one entry per iterate ``x_0 .. x_K``.

    ``coefficients[k]``, ``ranks[k]`` and ``min_norm[k]`` describe the step
    that produced ``x_k``; entry 0 is ``None``/``-1``/``False``.
    """

    method: str
    window: int | None = None
    xs: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    resnorms: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    min_norm: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    termination: str | None = None

    def record(self, x, r, coeffs=None, rank=-1, min_norm=False):
        self.xs.append(np.array(x, dtype=float))
        self.residuals.append(np.array(r, dtype=float))
        self.resnorms.append(float(np.linalg.norm(r)))
        self.coefficients.append(None if coeffs is None else np.array(coeffs, dtype=float))
        self.ranks.append(int(rank))
        self.min_norm.append(bool(min_norm))

    def __len__(self):
        return len(self.xs)

    @property
    def iterations(self) -> int:
        return len(self.xs) - 1

    @property
    def r0_norm(self) -> float:
        return self.resnorms[0]

    def resnorm_array(self) -> np.ndarray:
        return np.array(self.resnorms)

    def relative_resnorms(self) -> np.ndarray:
        r0 = self.r0_norm
        return self.resnorm_array() / (r0 if r0 > 0 else 1.0)

    def residual_drift(self, problem) -> float:
        """Largest ``||r_k - (A x_k - b)|| / ||r_0||`` over the trace."""
        r0 = self.r0_norm if self.r0_norm > 0 else 1.0
        return max(
            float(np.linalg.norm(r - problem.residual(x))) / r0
            for x, r in zip(self.xs, self.residuals)
        )
