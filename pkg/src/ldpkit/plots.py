"""Figure rendering for the report paths; every CSV gets a PNG sibling."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def rate_curve(zs, values, path, xlabel="z", title="rate"):
    fig, ax = plt.subplots(figsize=(6, 4))
    zs = np.asarray(zs, dtype=float)
    vals = np.array([v if np.isfinite(v) else np.nan for v in values])
    ax.plot(zs, vals, lw=1.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("rate")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def rate_scatter(points, values, path, title="rate"):
    pts = np.asarray(points, dtype=float)
    vals = np.array([v if np.isfinite(v) else np.nan for v in values])
    fig, ax = plt.subplots(figsize=(6, 5))
    sc = ax.scatter(pts[:, 0], pts[:, 1], c=vals, s=18, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="rate")
    ax.set_xlabel("z1")
    ax.set_ylabel("z2")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def region_map(rows, path, title="regions"):
    """rows: (x, y, region, value, boundary) tuples from the 2-D example."""
    order = ["D_INF", "D_GAMMA_STAR", "D_LIN_PLUS", "D_LIN_MINUS"]
    colors = {r: i for i, r in enumerate(order)}
    xs = np.array([r[0] for r in rows])
    ys = np.array([r[1] for r in rows])
    cs = np.array([colors[r[2]] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 5))
    sc = ax.scatter(xs, ys, c=cs, s=10, cmap="tab10", vmin=0, vmax=9)
    handles = [
        plt.Line2D([0], [0], marker="o", ls="", color=plt.cm.tab10(colors[r] / 9), label=r)
        for r in order
    ]
    ax.legend(handles=handles, fontsize=7, loc="upper left")
    ax.set_xlabel("z1")
    ax.set_ylabel("z2")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def decay_plot(estimate, path, title="tilted-IS decay"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = np.array(estimate.n_values, dtype=float)
    ds = np.array(estimate.decay, dtype=float)
    hw = np.array(estimate.half_width, dtype=float)
    keep = ~np.array(estimate.censored)
    ax.errorbar(ns[keep], ds[keep], yerr=hw[keep], fmt="o-", capsize=3, label="estimate")
    if estimate.computed_rate is not None and np.isfinite(estimate.computed_rate):
        ax.axhline(estimate.computed_rate, color="k", ls="--", lw=1, label="computed rate")
    if estimate.slope is not None:
        ax.axhline(estimate.slope, color="C3", ls=":", lw=1, label="extrapolated slope")
    ax.set_xlabel("n")
    ax.set_ylabel("-log(p)/n")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
