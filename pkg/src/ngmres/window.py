"""Sliding history of residuals and iterates for windowed NGMRES.

The least-squares matrix is ``W_k = D_k - Mr_k 1^T`` with
``D_k = [r_k, r_{k-1}, ..., r_{k-m_k}]``. Moving to ``k+1`` inserts one new
leading column, drops the oldest, and swaps the rank-one term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WindowState:
    capacity: int | None  # None keeps every vector
    residuals: tuple = ()  # newest first: r_k, r_{k-1}, ...
    iterates: tuple = ()
    Mr: np.ndarray | None = None

    @property
    def depth(self) -> int:
        """``m_k``: number of stored vectors behind the head."""
        return len(self.residuals) - 1

    def assemble(self) -> np.ndarray:
        """``W_k`` as an ``n x (m_k + 1)`` dense matrix."""
        D = np.column_stack(self.residuals)
        return D - self.Mr[:, None]


def window_advance(w: WindowState, r_new, x_new, Mr_new) -> WindowState:
    """Install a new head; evict the oldest pair once past capacity."""
    if w.residuals and len(r_new) != len(w.residuals[0]):
        raise ValueError("vector length does not match the window")
    keep = None if w.capacity is None else w.capacity + 1
    residuals = ((r_new,) + w.residuals)[:keep]
    iterates = ((x_new,) + w.iterates)[:keep]
    return WindowState(w.capacity, residuals, iterates, Mr_new)


def direct_assembly(residuals, Mr) -> np.ndarray:
    """Reference construction of ``W_k`` column by column."""
    return np.column_stack([r - Mr for r in residuals])
