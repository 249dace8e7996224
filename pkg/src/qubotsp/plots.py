"""Figure rendering: traces, heatmaps, tours, and benchmark summaries.

Everything renders straight to a file through the Agg backend, so these
work headless.  Each function returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchRow
from .heatmap import Heatmap
from .instances import TspInstance
from .qubo import Tour
from .schrodinger import EvolutionTrace


def plot_energy_trace(trace: np.ndarray, path: str | Path) -> Path:
    """Best-so-far energy per sweep for an annealer run."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(trace), lw=1.2)
    ax.set_xlabel("sweep")
    ax.set_ylabel("best energy")
    ax.set_title("annealing energy trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_loss_trace(trace: np.ndarray, path: str | Path) -> Path:
    """Relaxed QUBO loss per gradient step."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(trace), lw=1.2, color="tab:red")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title("heatmap loss trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_evolution_trace(trace: EvolutionTrace, path: str | Path) -> Path:
    """Ground-state probability and energy expectation over anneal time."""
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(trace.times, trace.ground_probability, color="tab:blue")
    ax1.set_ylabel("ground probability")
    ax1.set_ylim(-0.02, 1.02)
    ax2.plot(trace.times, trace.energy_expectation, color="tab:orange")
    ax2.set_xlabel("time")
    ax2.set_ylabel("energy expectation")
    fig.suptitle("state-vector anneal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_heatmap(heatmap: Heatmap, path: str | Path) -> Path:
    """Edge-probability matrix as an image."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(heatmap.H, cmap="viridis", vmin=0.0, vmax=1.0)
    ax.set_xlabel("city")
    ax.set_ylabel("city")
    ax.set_title("edge heatmap")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_tour(instance: TspInstance, tour: Tour, path: str | Path,
              heatmap: Heatmap | None = None) -> Path:
    """A tour in the plane, optionally over the heatmap's edge weights."""
    if instance.coords is None:
        raise ValueError("plotting a tour needs coordinates")
    path = Path(path)
    xy = instance.coords
    fig, ax = plt.subplots(figsize=(5, 5))
    if heatmap is not None:
        hmax = float(heatmap.H.max()) or 1.0
        for u in range(instance.n):
            for v in range(u + 1, instance.n):
                w = heatmap.H[u, v] / hmax
                if w > 0.05:
                    ax.plot(xy[[u, v], 0], xy[[u, v], 1], color="gray",
                            alpha=0.5 * w, lw=1.0, zorder=1)
    loop = list(tour.order) + [tour.order[0]]
    ax.plot(xy[loop, 0], xy[loop, 1], "-o", color="tab:blue", ms=4, zorder=2)
    ax.set_title(f"tour length {tour.length:.4f}")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bench(rows: list[BenchRow], path: str | Path) -> Path:
    """Mean tour length per method, one panel per instance size."""
    path = Path(path)
    sizes = sorted({row.n for row in rows})
    fig, axes = plt.subplots(1, len(sizes), figsize=(4 * len(sizes), 4),
                             squeeze=False)
    for ax, n in zip(axes[0], sizes):
        group = [row for row in rows if row.n == n]
        labels = [row.method for row in group]
        values = [row.mean_length for row in group]
        bars = ax.bar(labels, values, color="tab:blue")
        for bar, row in zip(bars, group):
            if row.gap_percent is not None:
                ax.annotate(f"{row.gap_percent:.2f}%",
                            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                            ha="center", va="bottom", fontsize=8)
        ax.set_title(f"n = {n}")
        ax.set_ylabel("mean length")
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
