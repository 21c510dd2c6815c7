"""Figure rendering for the CLI report paths.

Everything here writes PNG files next to the delimited outputs; no figure
is ever shown interactively, so the Agg backend is forced before pyplot is
imported.
"""

from __future__ import annotations

from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["branch_figure", "trajectory_figure", "bistab_figure"]

_STYLE = {
    "Stable": dict(color="tab:blue", marker=".", linestyle="none", label="stable"),
    "Unstable": dict(color="tab:red", marker=".", linestyle="none", label="unstable"),
    "Unknown": dict(color="tab:gray", marker=".", linestyle="none", label="unlabelled"),
    "Inconclusive": dict(color="tab:orange", marker=".", linestyle="none", label="inconclusive"),
}


def branch_figure(branch, path: str) -> None:
    """Endemic branch in the (R0, symptomatic) plane with folds marked."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    groups = {}
    for bp in branch.points:
        groups.setdefault(bp.stability, [[], []])
        groups[bp.stability][0].append(bp.r0_value)
        groups[bp.stability][1].append(bp.eq.I)
    for label, (xs, ys) in groups.items():
        ax.plot(xs, ys, **_STYLE.get(label, _STYLE["Unknown"]), markersize=3)
    for f in branch.folds:
        ax.plot([f.r0_value], [f.eq.I], marker="o", color="black",
                fillstyle="none", markersize=9, linestyle="none")
    ax.axvline(1.0, color="black", linewidth=0.6, alpha=0.5)
    ax.plot([1.0], [0.0], marker="x", color="black", markersize=8)
    ax.set_xlabel("basic reproduction number")
    ax.set_ylabel("symptomatic pool at equilibrium")
    if groups:
        ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def trajectory_figure(snaps: Sequence, dtau: float, path: str) -> None:
    """Compartment time series on a log scale (zeros masked out)."""
    t = np.array([s.t for s in snaps])
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for name, color in (("E", "tab:purple"), ("A", "tab:orange"), ("I", "tab:red")):
        y = np.array([getattr(s, name) for s in snaps], dtype=float)
        y = np.where(y > 0.0, y, np.nan)
        ax.plot(t, y, color=color, label=name)
    n = np.array([s.total_population(dtau) for s in snaps])
    ax.plot(t, n, color="tab:gray", linewidth=0.8, label="N")
    ax.set_yscale("log")
    ax.set_xlabel("time (days)")
    ax.set_ylabel("persons")
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def bistab_figure(runs: List, path: str) -> None:
    """Symptomatic time series of every seeding, one line per run."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for run in runs:
        if not run.series:
            continue
        t = np.array([s.t for s in run.series])
        y = np.array([s.I for s in run.series], dtype=float)
        y = np.where(y > 0.0, y, np.nan)
        ax.plot(t, y, label=f"I(0) = {run.init_I:g} -> {run.label}")
    ax.set_yscale("log")
    ax.set_xlabel("time (days)")
    ax.set_ylabel("symptomatic pool")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
