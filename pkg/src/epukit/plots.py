"""Figure rendering: index series, MSE curves, dendrograms (files only)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import Dendrogram
from .series import MonthlySeries


def _savefig(fig, path: str | Path) -> Path:
    """Save with the format taken from the real extension, so staging
    suffixes like ``.partial`` do not confuse format inference."""
    p = Path(path)
    name = p.name
    if name.endswith(".partial"):
        name = name[: -len(".partial")]
    fmt = Path(name).suffix.lstrip(".") or "png"
    fig.savefig(p, dpi=150, format=fmt)
    plt.close(fig)
    return p


def plot_series(
    path: str | Path,
    series_list: MonthlySeries | Sequence[MonthlySeries],
    title: str | None = None,
) -> Path:
    """Line plot of one or more monthly series; missing months become gaps."""
    if isinstance(series_list, MonthlySeries):
        series_list = [series_list]
    if not series_list:
        raise ValueError("nothing to plot")
    months = series_list[0].months()
    fig, ax = plt.subplots(figsize=(10, 4))
    for s in series_list:
        ys = [np.nan if s.values.get(m) is None else s.values[m] for m in months]
        ax.plot(range(len(months)), ys, label=f"{s.label} ({s.stage})", linewidth=1.2)
    step = max(1, len(months) // 8)
    ticks = list(range(0, len(months), step))
    ax.set_xticks(ticks)
    ax.set_xticklabels([months[i] for i in ticks], rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("index value")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _savefig(fig, path)


def plot_mse_curve(
    path: str | Path,
    curve: Sequence[tuple[int, float]],
    best_k: int | None = None,
    title: str | None = None,
) -> Path:
    """MSE against component count, with the selected k highlighted."""
    if not curve:
        raise ValueError("empty MSE curve")
    ks = [k for k, _ in curve]
    mses = [m for _, m in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, mses, marker="o", linewidth=1.2)
    if best_k is not None:
        best_mse = dict(curve)[best_k]
        ax.scatter([best_k], [best_mse], color="red", zorder=3, label=f"selected k={best_k}")
        ax.legend(fontsize=8)
    ax.set_xlabel("number of components")
    ax.set_ylabel("MSE")
    ax.set_xticks(ks)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _savefig(fig, path)


def plot_dendrogram(path: str | Path, dendrogram: Dendrogram, title: str | None = None) -> Path:
    """Draw the merge tree with U-shaped links, leaves along the x axis."""
    labels = dendrogram.labels
    n = len(labels)
    children = {n + j: (left, right) for j, (left, right, _) in enumerate(dendrogram.merges)}

    def leaves(node: int) -> list[int]:
        if node < n:
            return [node]
        left, right = children[node]
        return leaves(left) + leaves(right)

    root = n + len(dendrogram.merges) - 1
    order = leaves(root)
    x_center = {leaf: float(i) for i, leaf in enumerate(order)}
    height = {i: 0.0 for i in range(n)}

    fig, ax = plt.subplots(figsize=(max(6, 0.9 * n), 4))
    for j, (left, right, distance) in enumerate(dendrogram.merges):
        node = n + j
        xl, xr = x_center[left], x_center[right]
        ax.plot(
            [xl, xl, xr, xr],
            [height[left], distance, distance, height[right]],
            color="tab:blue",
            linewidth=1.2,
        )
        x_center[node] = (xl + xr) / 2.0
        height[node] = distance
    ax.set_xticks(range(n))
    ax.set_xticklabels([labels[i] for i in order], rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("distance (1 - r)")
    ax.grid(axis="y", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _savefig(fig, path)
