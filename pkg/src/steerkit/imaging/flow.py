"""Dense optical flow (coarse-to-fine Horn-Schunck) and flow rendering.

Flow fields are per-pixel displacements in pixels/frame: ``u`` points
right, ``v`` points down.  The estimator works on 0..255 luminance so
the default smoothness weight behaves like the classic 8-bit setting.
For visualization a field is converted to polar form and painted into
HSV: direction becomes hue, magnitude becomes value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ContractError, DimensionError
from .color import hsv_to_rgb, luminance
from .ppm import Frame


@dataclass
class FlowField:
    """Per-pixel 2-vector displacement between consecutive frames."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise DimensionError(f"flow planes must be equal 2-D shapes, got {self.u.shape} and {self.v.shape}")

    @property
    def shape(self) -> tuple:
        return self.u.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


def _replicate_pad(img: np.ndarray) -> np.ndarray:
    return np.pad(img, 1, mode="edge")


def _neighbor_average(f: np.ndarray) -> np.ndarray:
    # Horn-Schunck weighted 8-neighborhood: sides 1/6, diagonals 1/12.
    p = _replicate_pad(f)
    return ((p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]) / 6.0
            + (p[:-2, :-2] + p[:-2, 2:] + p[2:, :-2] + p[2:, 2:]) / 12.0)


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = _replicate_pad(img)
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) * 0.5
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) * 0.5
    return gx, gy


def _smooth3(img: np.ndarray) -> np.ndarray:
    # separable binomial [1,2,1]/4 in each direction
    p = _replicate_pad(img)
    h = (p[1:-1, :-2] + 2.0 * p[1:-1, 1:-1] + p[1:-1, 2:]) * 0.25
    p = _replicate_pad(h)
    return (p[:-2, 1:-1] + 2.0 * p[1:-1, 1:-1] + p[2:, 1:-1]) * 0.25


def _downsample2(img: np.ndarray) -> np.ndarray:
    s = _smooth3(img)
    h2, w2 = (s.shape[0] // 2) * 2, (s.shape[1] // 2) * 2
    s = s[:h2, :w2]
    return 0.25 * (s[0::2, 0::2] + s[0::2, 1::2] + s[1::2, 0::2] + s[1::2, 1::2])


def _resize_field(f: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = f.shape
    sy = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(sy), 0, in_h - 1).astype(np.int64)
    x0 = np.clip(np.floor(sx), 0, in_w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(sy - y0, 0.0, 1.0)[:, None]
    wx = np.clip(sx - x0, 0.0, 1.0)[None, :]
    top = f[y0][:, x0] * (1 - wx) + f[y0][:, x1] * wx
    bot = f[y1][:, x0] * (1 - wx) + f[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    sx = np.clip(xs + u, 0.0, w - 1.0)
    sy = np.clip(ys + v, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    return (img[y0, x0] * (1 - fx) * (1 - fy) + img[y0, x1] * fx * (1 - fy)
            + img[y1, x0] * (1 - fx) * fy + img[y1, x1] * fx * fy)


def _hs_level(i1: np.ndarray, i2: np.ndarray, u: np.ndarray, v: np.ndarray,
              iters: int, alpha: float, warps: int = 2) -> tuple[np.ndarray, np.ndarray]:
    alpha2 = alpha * alpha
    for _ in range(warps):
        u0, v0 = u.copy(), v.copy()
        i2w = _warp(i2, u0, v0)
        gx1, gy1 = _gradients(i1)
        gx2, gy2 = _gradients(i2w)
        ix = 0.5 * (gx1 + gx2)
        iy = 0.5 * (gy1 + gy2)
        # residual rewritten so the smoothness term acts on the total flow
        it_eff = (i2w - i1) - ix * u0 - iy * v0
        den = alpha2 + ix * ix + iy * iy
        for _ in range(iters):
            ubar = _neighbor_average(u)
            vbar = _neighbor_average(v)
            t = (ix * ubar + iy * vbar + it_eff) / den
            u = ubar - ix * t
            v = vbar - iy * t
    return u, v


def compute_dense_flow(prev: Frame, next: Frame, levels: int = 3, iters: int = 50,
                       alpha: float = 15.0) -> FlowField:
    """Estimate per-pixel displacement from ``prev`` to ``next``.

    Coarse-to-fine Horn-Schunck: a luminance pyramid is built by factor-2
    reduction, the flow is solved at the coarsest level and upsampled as
    the initial guess for the next, with one re-warping pass per level.
    Deterministic; identical frames give an exactly zero field.
    """
    if prev.pixels.shape != next.pixels.shape:
        raise DimensionError(f"frame sizes differ: {prev.pixels.shape} vs {next.pixels.shape}")
    if levels < 1:
        raise ContractError(f"levels must be >= 1, got {levels}")

    i1 = luminance(prev.pixels) * 255.0
    i2 = luminance(next.pixels) * 255.0

    pyr1, pyr2 = [i1], [i2]
    while len(pyr1) < levels and min(pyr1[-1].shape) >= 16:
        pyr1.append(_downsample2(pyr1[-1]))
        pyr2.append(_downsample2(pyr2[-1]))

    u = np.zeros_like(pyr1[-1])
    v = np.zeros_like(pyr1[-1])
    for lvl in range(len(pyr1) - 1, -1, -1):
        a, b = pyr1[lvl], pyr2[lvl]
        if u.shape != a.shape:
            scale_x = a.shape[1] / u.shape[1]
            scale_y = a.shape[0] / u.shape[0]
            u = _resize_field(u, *a.shape) * scale_x
            v = _resize_field(v, *a.shape) * scale_y
        u, v = _hs_level(a, b, u, v, iters, alpha)
    return FlowField(u, v)


def encode_flow_hsv(flow: FlowField, mag_cap: float = 10.0) -> Frame:
    """Render a flow field as an RGB frame via the HSV color wheel.

    Direction ``atan2(v, u)`` in [0, 2pi) maps to hue [0, 360); saturation
    is fixed at 1; magnitude maps linearly to value, saturating at
    ``mag_cap`` pixels/frame.  Zero flow renders black.
    """
    if mag_cap <= 0:
        raise ContractError(f"mag_cap must be positive, got {mag_cap}")
    angle = np.arctan2(flow.v, flow.u) % (2.0 * np.pi)
    hue = angle * (180.0 / np.pi)
    value = np.minimum(flow.magnitude() / mag_cap, 1.0)
    hsv = np.stack([hue, np.ones_like(hue), value], axis=-1)
    return Frame(hsv_to_rgb(hsv))


def weighted_flow_average(flows: Sequence[FlowField], weights: Sequence[float]) -> FlowField:
    """Pixelwise convex combination of equally sized flow fields.

    Weights are renormalized (with a warning) if they do not sum to 1.
    """
    if len(flows) == 0:
        raise ContractError("weighted_flow_average of an empty list")
    if len(weights) != len(flows):
        raise ContractError(f"{len(flows)} flows but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise ContractError("weights must have a positive sum")
    if abs(total - 1.0) > 1e-12:
        warnings.warn(f"flow weights sum to {total:.6g}; renormalizing", stacklevel=2)
        w = w / total
    shape = flows[0].shape
    for f in flows[1:]:
        if f.shape != shape:
            raise DimensionError(f"flow field shapes differ: {shape} vs {f.shape}")
    u = sum(wi * f.u for wi, f in zip(w, flows))
    v = sum(wi * f.v for wi, f in zip(w, flows))
    return FlowField(u, v)


def exponential_flow_weights(k: int, decay: float = 0.5) -> np.ndarray:
    """Normalized weights ``decay**j`` for j = 0..k-1 (most recent first)."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    w = decay ** np.arange(k, dtype=np.float64)
    return w / w.sum()
