"""Figure rendering for the report path.

Every figure lands next to its CSV: prediction curves beside the
prediction CSV, attention heatmap grids beside the attention exports,
and training curves beside the metrics log.  Rendering is headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import PredictionSeries
from .models import ModelOutput


def save_prediction_figure(series: PredictionSeries, path: str | os.PathLike,
                           smoothed: np.ndarray | None = None) -> None:
    """Target (green) vs prediction (red) over time, optional smoothed overlay."""
    t = (series.timestamps - series.timestamps[0]) / 1e9
    fig, axes = plt.subplots(
        2 if series.speed_predictions is not None else 1, 1,
        figsize=(9, 5), squeeze=False, sharex=True)
    ax = axes[0][0]
    ax.plot(t, series.targets, color="tab:green", label="target", linewidth=1.2)
    ax.plot(t, series.predictions, color="tab:red", label="prediction", linewidth=1.0)
    if smoothed is not None:
        ax.plot(t, smoothed, color="tab:blue", label="smoothed", linewidth=1.0, alpha=0.8)
    ax.set_ylabel("steering angle [rad]")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    if series.speed_predictions is not None:
        ax2 = axes[1][0]
        ax2.plot(t, series.speed_predictions, color="tab:orange", label="speed prediction")
        ax2.set_ylabel("speed [m/s]")
        ax2.legend(loc="upper right", fontsize=8)
        ax2.grid(alpha=0.3)
    axes[-1][0].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_attention_figure(output: ModelOutput, path: str | os.PathLike) -> None:
    """Grid of attention heatmaps: rows = (layer, branch), columns = heads."""
    if output.attention is None:
        raise ValueError("model output carries no attention maps")
    rows = []
    for layer_i, entry in enumerate(output.attention):
        for branch, weights in entry.items():
            rows.append((f"L{layer_i} {branch}", weights.data[0]))
    n_heads = rows[0][1].shape[0]
    fig, axes = plt.subplots(len(rows), n_heads,
                             figsize=(2.2 * n_heads, 2.2 * len(rows)), squeeze=False)
    for r, (label, w) in enumerate(rows):
        for h in range(n_heads):
            ax = axes[r][h]
            ax.imshow(w[h], cmap="viridis", vmin=0.0, vmax=1.0)
            ax.set_xticks([])
            ax.set_yticks([])
            if h == 0:
                ax.set_ylabel(label, fontsize=8)
            if r == 0:
                ax.set_title(f"head {h}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_curves(metrics_rows: list[dict], path: str | os.PathLike) -> None:
    """Loss-vs-epoch curves from the metrics rows written to metrics.csv."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for split in ("train", "val"):
        rows = [r for r in metrics_rows if r["split"] == split]
        if rows:
            ax.plot([r["epoch"] for r in rows], [r["loss_angle"] for r in rows],
                    label=f"{split} angle loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("RMSE loss [rad]")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
