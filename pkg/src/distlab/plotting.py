"""Static SVG figures of error traces."""

from __future__ import annotations

from os import PathLike
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .problem import ErrorTrace  # noqa: E402

LOG_FLOOR = 1e-18

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 0.6,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "distlab",
    "svg.fonttype": "none",
}

LABELS = {"e_opt": "optimization error", "e_con": "consensus error", "e_total": "error"}


def floored(values) -> np.ndarray:
    """Clamp for log display; non-finite values pass through untouched."""
    v = np.asarray(values, dtype=float)
    return np.where(np.isfinite(v), np.maximum(v, LOG_FLOOR), v)


MAX_POINTS = 4000


def _series(t: ErrorTrace, metric: str) -> tuple[np.ndarray, np.ndarray]:
    v = t.e_total if metric == "e_total" else getattr(t, metric)
    stride = max(1, -(-v.size // MAX_POINTS))
    k = t.iterations[::stride]
    return k, floored(v[::stride])


def emit_plot(
    traces: Sequence[ErrorTrace],
    path: str | PathLike,
    metrics: Sequence[str] = ("e_total",),
    title: str | None = None,
) -> None:
    """One column per variant, one row per metric; thin per-trial curves, thick mean."""
    variants: list[str] = []
    for t in traces:
        if t.meta.get("variant") not in variants:
            variants.append(t.meta.get("variant"))
    ncols = max(len(variants), 1)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(
            len(metrics), ncols, figsize=(3.4 * ncols, 2.4 * len(metrics)), squeeze=False, sharex=True
        )
        for c, name in enumerate(variants):
            group = [t for t in traces if t.meta.get("variant") == name]
            for r, metric in enumerate(metrics):
                ax = axes[r, c]
                for t in group:
                    k, v = _series(t, metric)
                    if t.meta.get("trial") == "mean":
                        ax.semilogy(k, v, color="C3", lw=2.0, label=f"{name} mean")
                    else:
                        ax.semilogy(k, v, color="C0", alpha=0.25)
                if r == 0:
                    ax.set_title(str(name))
                if c == 0:
                    ax.set_ylabel(LABELS.get(metric, metric))
                if r == len(metrics) - 1:
                    ax.set_xlabel("iteration")
                if any(t.meta.get("trial") == "mean" for t in group):
                    ax.legend(loc="upper right")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write plot to {path}: {exc}") from exc
        finally:
            plt.close(fig)
