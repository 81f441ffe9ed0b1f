"""Static SVG figures for the comparison and benchmark reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns write identical files
plt.rcParams.update({
    "svg.hashsalt": "nocsynth",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})
_META = {"Date": None}
_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def comparison_chart(rows: list[dict], path: str) -> str:
    """One bar group per metric, one bar per architecture."""
    metrics = (("delta_cycles", "makespan (cycles)"),
               ("avg_latency", "avg latency (cycles)"),
               ("energy_j", "energy per block (J)"))
    fig, axes = plt.subplots(1, len(metrics), figsize=(8, 2.8))
    names = [r["arch"] for r in rows]
    x = np.arange(len(rows))
    for ax, (key, label) in zip(axes, metrics):
        vals = [float(r[key]) for r in rows]
        ax.bar(x, vals, color=_COLORS[: len(rows)], width=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels(names)
        ax.set_title(label)
        for xi, v in zip(x, vals):
            ax.annotate(f"{v:.3g}", (xi, v), ha="center", va="bottom", fontsize=7)
    return _save(fig, path)


def bench_chart(rows: list[dict], path: str) -> str:
    """Wall time against node count, one marker per instance and the mean as a line."""
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ns = np.array([int(r["n"]) for r in rows])
    ts = np.array([float(r["wall_s"]) for r in rows])
    ax.scatter(ns, ts, s=12, color=_COLORS[0], alpha=0.6, label="instance")
    sizes = np.unique(ns)
    if len(sizes):
        ax.plot(sizes, [ts[ns == n].mean() for n in sizes], color=_COLORS[1], label="mean")
    ax.set_yscale("log")
    ax.set_xlabel("nodes")
    ax.set_ylabel("run time (s)")
    ax.legend(frameon=False)
    return _save(fig, path)
