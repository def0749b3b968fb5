"""Static SVG figures for experiment records and 2D solves."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_error_vs_n", "plot_landscape", "plot_stages"]


def plot_error_vs_n(records, path, title: str = "") -> None:
    """Median final error vs budget on log-log axes, with the range over seeds shaded."""
    groups = defaultdict(lambda: defaultdict(list))
    for rec in records:
        groups[rec["method"]][rec["n"]].append(max(rec["gap_to_true_min"], 1e-16))
    fig, ax = plt.subplots(figsize=(5, 4))
    for method, by_n in sorted(groups.items()):
        ns = np.array(sorted(by_n))
        vals = [np.array(by_n[n]) for n in ns]
        med = np.array([np.median(v) for v in vals])
        lo = np.array([v.min() for v in vals])
        hi = np.array([v.max() for v in vals])
        line, = ax.plot(ns, med, marker="o", label=method)
        ax.fill_between(ns, lo, hi, color=line.get_color(), alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("function evaluations n")
    ax.set_ylabel("f(z) - f*")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_landscape(f, domain, X, z, path, zeta=None, grid: int = 200) -> None:
    """Contour of a 2D objective with samples and the candidate minimizer."""
    lo, hi = domain.bounding_box()
    gx = np.linspace(lo[0], hi[0], grid)
    gy = np.linspace(lo[1], hi[1], grid)
    G = np.stack(np.meshgrid(gx, gy), -1).reshape(-1, 2)
    V = np.asarray(f(G)).reshape(grid, grid)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    cs = ax.contourf(gx, gy, V, levels=30, cmap="viridis")
    fig.colorbar(cs, ax=ax)
    ax.scatter(X[:, 0], X[:, 1], s=4, c="white", alpha=0.7, label="samples")
    ax.scatter([z[0]], [z[1]], marker="*", s=150, c="red", label="candidate")
    if zeta is not None:
        ax.scatter([zeta[0]], [zeta[1]], marker="x", s=80, c="orange", label="true minimizer")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_stages(stage_log, path) -> None:
    """Stage radius and candidate movement across warm-restart stages."""
    t = [row["stage"] for row in stage_log]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(t, [row["radius"] for row in stage_log], marker="o", label="radius")
    ax.semilogy(t, [max(row["step"], 1e-16) for row in stage_log], marker="s", label="|z_t - z_{t-1}|")
    ax.set_xlabel("stage")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
