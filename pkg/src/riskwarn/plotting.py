"""Figures rendered next to the CLI's tables (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(summary: Sequence[dict], path: Path) -> Path:
    """Mean IoU against position noise (one panel per swap rate)."""
    ps = sorted({r["p"] for r in summary})
    curves = sorted({(r["method"], r["variant"]) for r in summary})
    fig, axes = plt.subplots(1, len(ps), figsize=(3.2 * len(ps), 3.2), sharey=True, squeeze=False)
    for ax, p in zip(axes[0], ps):
        for m, v in curves:
            rows = sorted((r for r in summary if r["p"] == p and (r["method"], r["variant"]) == (m, v)),
                          key=lambda r: r["sigma"])
            x = [r["sigma"] for r in rows]
            y = np.array([r["iou_mean"] for r in rows])
            e = np.array([r["iou_std"] for r in rows])
            line, = ax.plot(x, y, marker="o", ms=3, label=f"{m} / {v}")
            ax.fill_between(x, y - e, y + e, color=line.get_color(), alpha=0.15)
        ax.set_title(f"swap rate {p:g}")
        ax.set_xlabel("position noise sigma [m]")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("IoU")
    axes[0][-1].legend(fontsize=7)
    return _save(fig, path)


def plot_correlation(labels: Sequence[str], rho: np.ndarray, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.3))
    im = ax.imshow(rho, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    for i in range(len(labels)):
        for j in range(len(labels)):
            ax.text(j, i, f"{rho[i, j]:.2f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax, label="Spearman rho")
    return _save(fig, path)


def plot_history(history: Sequence[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    g = [h["generation"] for h in history]
    ax.plot(g, [h["best_fitness"] for h in history], label="best so far")
    ax.plot(g, [h["mean_fitness"] for h in history], label="population mean")
    ax.set_xlabel("generation")
    ax.set_ylabel("IoU")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)
