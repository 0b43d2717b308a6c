"""Test-set RMSE, exponential output smoothing, and artifact export.

Evaluation never augments.  Each sequence window contributes its
last-step prediction, assigned to the window's last frame; the reported
RMSE is sqrt(mean((target - prediction)^2)) over all evaluated frames.
Smoothing is the first-order recursion s_t = f*y_t + (1-f)*s_{t-1} with
``f`` weighting the new prediction, so f = 1 is the identity and small
f smooths heavily.  (For the opposite convention pass 1 - f.)
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .imaging import Frame, write_ppm
from .models import ModelOutput
from .tensor import no_grad
from .training import prepare_batch


@dataclass
class PredictionSeries:
    """Per-frame timestamps, targets, and predictions (speed optional)."""

    timestamps: np.ndarray
    targets: np.ndarray
    predictions: np.ndarray
    speed_predictions: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.timestamps)


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise ContractError(f"rmse needs equal nonempty lengths, got {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def evaluate(model, samples, flow_mag_cap: float = 10.0,
             batch_size: int = 16) -> tuple[PredictionSeries, float]:
    """Pure forward evaluation of a sequence set; returns series and RMSE."""
    n = len(samples)
    if n == 0:
        raise ContractError("cannot evaluate an empty sample list")
    timestamps, targets, preds, speed_preds = [], [], [], []
    has_speed = False
    with no_grad():
        for start in range(0, n, batch_size):
            batch = [samples[i] for i in range(start, min(start + batch_size, n))]
            rgb, flow, angles, _ = prepare_batch(batch, model, None, None, flow_mag_cap)
            output = model.forward(rgb, flow)
            preds.extend(output.angle.data[:, -1].tolist())
            if output.speed is not None:
                has_speed = True
                speed_preds.extend(output.speed.data[:, -1].tolist())
            for sample in batch:
                timestamps.append(int(sample.timestamps[-1]))
                targets.append(float(sample.angles[-1]))
    series = PredictionSeries(
        timestamps=np.asarray(timestamps, dtype=np.int64),
        targets=np.asarray(targets),
        predictions=np.asarray(preds),
        speed_predictions=np.asarray(speed_preds) if has_speed else None,
    )
    return series, rmse(series.predictions, series.targets)


def exp_smooth(values, factor: float) -> np.ndarray:
    """First-order recursive filter; ``factor`` is the new-sample weight."""
    if not (0.0 < factor <= 1.0):
        raise ContractError(f"smoothing factor must be in (0,1], got {factor}")
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ContractError("cannot smooth an empty series")
    out = np.empty_like(v)
    out[0] = v[0]
    for i in range(1, v.size):
        out[i] = factor * v[i] + (1.0 - factor) * out[i - 1]
    return out


def export_attention(output: ModelOutput, out_dir: str | os.PathLike,
                     prefix: str = "attention") -> list[str]:
    """Write per-(layer, branch, head) grayscale PPM heatmaps plus CSVs.

    Row = query position; weight 0 maps to black and 1 to white.  The
    CSV carries the full-precision matrix with identical naming.
    """
    if output.attention is None:
        raise ContractError("model output carries no attention maps")
    os.makedirs(out_dir, exist_ok=True)
    paths: list[str] = []
    for layer_i, entry in enumerate(output.attention):
        for branch, weights in entry.items():
            w = weights.data[0]  # first batch element: [heads, L, L]
            for head in range(w.shape[0]):
                matrix = w[head]
                stem = f"{prefix}_layer{layer_i}_{branch}_head{head}"
                ppm_path = os.path.join(out_dir, stem + ".ppm")
                gray = np.repeat(matrix[:, :, None], 3, axis=2)
                write_ppm(Frame(gray), ppm_path)
                csv_path = os.path.join(out_dir, stem + ".csv")
                with open(csv_path, "w", encoding="ascii") as fh:
                    for row in matrix:
                        fh.write(",".join(repr(float(x)) for x in row) + "\n")
                paths.extend([ppm_path, csv_path])
    return paths


def emit_plot_data(series: PredictionSeries, path: str | os.PathLike) -> None:
    """CSV ``timestamp,target,prediction[,speed_pred]`` at full precision."""
    header = "timestamp,target,prediction"
    if series.speed_predictions is not None:
        header += ",speed_pred"
    lines = [header]
    for i in range(len(series)):
        row = (f"{int(series.timestamps[i])},{float(series.targets[i])!r},"
               f"{float(series.predictions[i])!r}")
        if series.speed_predictions is not None:
            row += f",{float(series.speed_predictions[i])!r}"
        lines.append(row)
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
