"""Static figures for a clustering run.

All figures are written as SVG with a fixed hash salt and no date
metadata, so re-rendering the same run gives identical files.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from pkcluster.curves import AlignedDataset  # noqa: E402
from pkcluster.evaluation import CviSweep  # noqa: E402
from pkcluster.hierarchy import Dendrogram, Partition, cut, cut_height  # noqa: E402

plt.rcParams.update(
    {
        "svg.hashsalt": "pkcluster",
        "svg.fonttype": "none",
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)

CLUSTER_COLORS = plt.get_cmap("tab10").colors


def save_svg(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def _mean_sd(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    sd = rows.std(axis=0, ddof=1) if len(rows) > 1 else np.zeros(rows.shape[1])
    return mean, sd


def plot_cluster_curves(
    dataset: AlignedDataset, partition: Partition, path: str | Path, ylabel: str | None = None
) -> Path:
    """One panel per cluster: member curves, cluster mean and +-1 sd whiskers."""
    k = partition.k
    ncols = min(k, 4)
    nrows = -(-k // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows), squeeze=False,
                             sharex=True, sharey=True)
    t = dataset.t
    labels = partition.labels_for(dataset.curve_ids)
    for c in range(1, k + 1):
        ax = axes[(c - 1) // ncols][(c - 1) % ncols]
        ax.set_gid(f"cluster-panel-{c}")
        rows = dataset.matrix[labels == c]
        color = CLUSTER_COLORS[(c - 1) % len(CLUSTER_COLORS)]
        for r in rows:
            ax.plot(t, r, color=color, alpha=0.25, lw=0.6)
        mean, sd = _mean_sd(rows)
        ax.errorbar(t, mean, yerr=sd, color="black", lw=1.4, capsize=3, marker="o", ms=3)
        ax.set_title(f"Cluster {c} (n={len(rows)})")
        ax.set_xlabel("Time (h)")
    for i in range(k, nrows * ncols):
        axes[i // ncols][i % ncols].set_visible(False)
    if ylabel is None:
        ylabel = "Conc. / dose" if dataset.normalization == "dose_normalized" else "Concentration"
    for row in axes:
        row[0].set_ylabel(ylabel)
    return save_svg(fig, path)


def plot_label_means(
    dataset: AlignedDataset, labels: Mapping[str, str], path: str | Path, label_name: str = "label"
) -> Path:
    """Mean curve per label value with +-1 sd whiskers."""
    groups: dict[str, list[int]] = {}
    for i, cid in enumerate(dataset.curve_ids):
        groups.setdefault(labels.get(cid) or "unknown", []).append(i)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    t = dataset.t
    for j, (value, idx) in enumerate(sorted(groups.items())):
        mean, sd = _mean_sd(dataset.matrix[idx])
        ax.errorbar(t + 0.04 * j, mean, yerr=sd, capsize=3, marker="o", ms=3,
                    label=f"{value} (n={len(idx)})", color=CLUSTER_COLORS[j % len(CLUSTER_COLORS)])
    ax.set_xlabel("Time (h)")
    ax.set_ylabel("Mean concentration")
    ax.set_title(f"Average curve by {label_name}")
    ax.legend(frameon=False)
    return save_svg(fig, path)


def dendrogram_coordinates(tree: Dendrogram) -> tuple[dict[int, float], list[tuple]]:
    """Leaf x positions and one ``(xs, ys)`` polyline per merge."""
    n = tree.n
    x = {leaf: float(slot) for slot, leaf in enumerate(tree.leaf_order())}
    y = {i: 0.0 for i in range(n)}
    segments = []
    for i, m in enumerate(tree.merges):
        xl, xr = x[m.left], x[m.right]
        segments.append(((xl, xl, xr, xr), (y[m.left], m.height, m.height, y[m.right])))
        x[n + i] = (xl + xr) / 2
        y[n + i] = m.height
    return x, segments


def plot_dendrogram(
    tree: Dendrogram,
    path: str | Path,
    k: int | None = None,
    highlight: Iterable[str] = (),
    show_leaf_labels: bool | None = None,
) -> Path:
    """Dendrogram with one box around each of the ``k`` clusters."""
    highlight = set(highlight)
    n = tree.n
    x, segments = dendrogram_coordinates(tree)
    fig, ax = plt.subplots(figsize=(max(6, min(0.08 * n, 24)), 4))
    for xs, ys in segments:
        ax.plot(xs, ys, color="black", lw=0.7)
    top = float(tree.heights.max()) if len(tree.merges) else 1.0
    if k is not None and k > 1:
        h = cut_height(tree, k)
        ax.axhline(h, color="grey", ls="--", lw=0.8)
        part = cut(tree, k)
        for c, members in part.clusters().items():
            pos = [x[tree.leaves.index(cid)] for cid in members]
            rect = Rectangle((min(pos) - 0.4, -0.02 * top), max(pos) - min(pos) + 0.8, h * 0.98 + 0.02 * top,
                             fill=False, edgecolor="red", lw=1.2)
            rect.set_gid(f"cluster-box-{c}")
            ax.add_patch(rect)
    order = tree.leaf_order()
    if show_leaf_labels is None:
        show_leaf_labels = n <= 60
    if show_leaf_labels:
        ax.set_xticks(range(n), [tree.leaves[i] for i in order], rotation=90, fontsize=6)
    else:
        ax.set_xticks([])
    for slot, leaf in enumerate(order):
        if tree.leaves[leaf] in highlight:
            ax.annotate(tree.leaves[leaf], (slot, 0), xytext=(0, -14), textcoords="offset points",
                        rotation=90, ha="center", va="top", fontsize=6, color="red")
    ax.set_xlim(-1, n)
    ax.set_ylabel("Height")
    ax.set_title(f"Dendrogram ({tree.linkage} linkage)")
    return save_svg(fig, path)


def plot_ch_sweep(sweep: CviSweep, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3))
    scores = [s if np.isfinite(s) else np.nan for s in sweep.scores]
    ax.plot(sweep.k_values, scores, marker="o", color="black")
    ax.axvline(sweep.argmax_k, color="red", ls=":", lw=0.8)
    ax.set_xlabel("Number of clusters")
    ax.set_ylabel("Calinski-Harabasz index")
    ax.set_xticks(list(sweep.k_values))
    return save_svg(fig, path)


def plot_run(
    dataset: AlignedDataset | None,
    tree: Dendrogram,
    partition: Partition,
    outdir: str | Path,
    sweep: CviSweep | None = None,
    labels: Mapping[str, str] | None = None,
    label_name: str = "label",
    highlight: Sequence[str] = (),
) -> dict[str, Path]:
    """Render every figure available for a run into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = {"dendrogram": plot_dendrogram(tree, outdir / "dendrogram_clusters.svg", partition.k, highlight)}
    if dataset is not None:
        out["clusters"] = plot_cluster_curves(dataset.subset(partition.ids), partition, outdir / "cluster_curves.svg")
        if labels:
            out["labels"] = plot_label_means(dataset, labels, outdir / "label_means.svg", label_name)
    if sweep is not None:
        out["ch_sweep"] = plot_ch_sweep(sweep, outdir / "ch_sweep.svg")
    return out
