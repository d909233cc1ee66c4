"""Convergence plots rendered to SVG with matplotlib."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

_STYLES = ("-", "--", "-.", ":")


def convergence_svg(series: dict, title: str = "") -> str:
    """Render ``{label: relative residual norms}`` as an SVG string.

    The y-axis is log-scaled; exact zeros are dropped from each curve. Output
    is byte-stable across runs (fixed hash salt, no date metadata).
    """
    with plt.rc_context({"svg.hashsalt": "ngmres", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for idx, (label, values) in enumerate(series.items()):
            y = np.asarray(values, dtype=float)
            it = np.arange(len(y))
            keep = y > 0
            ax.semilogy(it[keep], y[keep], _STYLES[idx % len(_STYLES)], lw=1.4, label=label)
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.set_xlabel("iteration")
        ax.set_ylabel(r"$\|r_k\|_2 / \|r_0\|_2$")
        if title:
            ax.set_title(title, fontsize=10)
        ax.grid(True, which="major", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
