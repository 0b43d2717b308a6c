"""Training-time image augmentation and bilinear resizing.

Five augmentations, each driven by an independent draw from the supplied
generator: HSV-value brightness scaling, a half-plane shadow cast across
a random chord, small integer translation with edge replication, small
rotation about the center, and box blur.  Draws with zero magnitude skip
the corresponding transform entirely, so a degenerate policy reproduces
the input bit for bit.  Weak shifts and rotations are the intended
regime; they leave the steering label unchanged unless the policy opts
into label adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .color import hsv_to_rgb, rgb_to_hsv
from .ppm import Frame


@dataclass
class AugmentPolicy:
    """Ranges for the random augmentation draws.

    ``brightness_range`` multiplies the HSV value channel; ``shadow_dim``
    scales pixels on the far side of a random chord; ``translate_px``
    bounds |dx| and |dy|; ``rotate_deg`` bounds |rotation|;
    ``blur_kernel`` is the largest (odd) box-blur size drawn.
    """

    brightness_range: tuple[float, float] = (0.6, 1.4)
    shadow_prob: float = 0.5
    shadow_dim: float = 0.5
    translate_px: int = 10
    rotate_deg: float = 5.0
    blur_kernel: int = 3
    seed: int = 0
    adjust_label: bool = False
    angle_per_px: float = 0.004  # label shift per pixel of horizontal translation, used only when adjust_label

    def __post_init__(self):
        lo, hi = self.brightness_range
        if not (0.0 < lo <= hi):
            raise ContractError(f"bad brightness_range {self.brightness_range}")
        if not (0.0 <= self.shadow_prob <= 1.0):
            raise ContractError(f"shadow_prob must be in [0,1], got {self.shadow_prob}")
        if not (0.0 < self.shadow_dim < 1.0):
            raise ContractError(f"shadow_dim must be in (0,1), got {self.shadow_dim}")
        if self.translate_px < 0:
            raise ContractError(f"translate_px must be >= 0, got {self.translate_px}")
        if not (0.0 <= self.rotate_deg <= 10.0):
            raise ContractError(f"rotate_deg must be in [0,10], got {self.rotate_deg}")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ContractError(f"blur_kernel must be odd and >= 1, got {self.blur_kernel}")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentPolicy":
        """Policy whose every draw has zero magnitude."""
        return cls(brightness_range=(1.0, 1.0), shadow_prob=0.0, translate_px=0,
                   rotate_deg=0.0, blur_kernel=1, seed=seed)


def _scale_brightness(pixels: np.ndarray, factor: float) -> np.ndarray:
    hsv = rgb_to_hsv(pixels)
    hsv[..., 2] = np.clip(hsv[..., 2] * factor, 0.0, 1.0)
    return hsv_to_rgb(hsv)


def _cast_shadow(pixels: np.ndarray, rng: np.random.Generator, dim: float) -> np.ndarray:
    h, w = pixels.shape[:2]
    # chord through two independent border-free points, shade one side
    x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    nx, ny = np.cos(theta), np.sin(theta)
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    side = (xs - x0) * nx + (ys - y0) * ny > 0.0
    out = pixels.copy()
    out[side] *= dim
    return out


def _translate(pixels: np.ndarray, dx: int, dy: int) -> np.ndarray:
    h, w = pixels.shape[:2]
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return pixels[np.ix_(ys, xs)]


def _rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    h, w = pixels.shape[:2]
    rad = np.deg2rad(degrees)
    c, s = np.cos(rad), np.sin(rad)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    xr = c * (xs - cx) + s * (ys - cy) + cx
    yr = -s * (xs - cx) + c * (ys - cy) + cy
    xr = np.clip(xr, 0.0, w - 1.0)
    yr = np.clip(yr, 0.0, h - 1.0)
    x0 = np.floor(xr).astype(np.int64)
    y0 = np.floor(yr).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xr - x0)[..., None]
    fy = (yr - y0)[..., None]
    return (pixels[y0, x0] * (1 - fx) * (1 - fy) + pixels[y0, x1] * fx * (1 - fy)
            + pixels[y1, x0] * (1 - fx) * fy + pixels[y1, x1] * fx * fy)


def _box_blur(pixels: np.ndarray, k: int) -> np.ndarray:
    r = k // 2
    padded = np.pad(pixels, ((r, r), (r, r), (0, 0)), mode="edge")
    csum = np.cumsum(np.cumsum(padded, axis=0), axis=1)
    csum = np.pad(csum, ((1, 0), (1, 0), (0, 0)))
    h, w = pixels.shape[:2]
    out = (csum[k:k + h, k:k + w] - csum[:h, k:k + w]
           - csum[k:k + h, :w] + csum[:h, :w]) / (k * k)
    return out


def augment(frame: Frame, label_angle: float, policy: AugmentPolicy,
            rng: np.random.Generator | None = None) -> tuple[Frame, float]:
    """Apply one random draw of every augmentation in the policy.

    Returns the augmented frame (same size, values clamped to [0,1]) and
    the label, which only changes when ``policy.adjust_label`` is set.
    Deterministic for a given generator state.
    """
    if rng is None:
        rng = np.random.default_rng(policy.seed)
    pixels = frame.pixels

    factor = rng.uniform(*policy.brightness_range)
    if factor != 1.0:
        pixels = _scale_brightness(pixels, factor)

    if rng.uniform() < policy.shadow_prob:
        pixels = _cast_shadow(pixels, rng, policy.shadow_dim)

    dx = int(rng.integers(-policy.translate_px, policy.translate_px + 1))
    dy = int(rng.integers(-policy.translate_px, policy.translate_px + 1))
    if dx or dy:
        pixels = _translate(pixels, dx, dy)
    if policy.adjust_label:
        label_angle = label_angle + policy.angle_per_px * dx

    degrees = rng.uniform(-policy.rotate_deg, policy.rotate_deg)
    if degrees != 0.0:
        pixels = _rotate(pixels, degrees)

    ks = np.arange(1, policy.blur_kernel + 1, 2)
    k = int(rng.choice(ks))
    if k > 1:
        pixels = _box_blur(pixels, k)

    if pixels is frame.pixels:
        return frame, label_angle
    return Frame(np.clip(pixels, 0.0, 1.0), timestamp=frame.timestamp), label_angle


def resize_bilinear(frame: Frame, out_h: int, out_w: int) -> Frame:
    """Standard bilinear resize, align-corners=false convention."""
    if out_h < 2 or out_w < 2:
        raise ContractError(f"output dims must be >= 2, got {out_h}x{out_w}")
    in_h, in_w = frame.height, frame.width
    sy = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(sy), 0, in_h - 1).astype(np.int64)
    x0 = np.clip(np.floor(sx), 0, in_w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(sy - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(sx - x0, 0.0, 1.0)[None, :, None]
    px = frame.pixels
    top = px[y0][:, x0] * (1 - wx) + px[y0][:, x1] * wx
    bot = px[y1][:, x0] * (1 - wx) + px[y1][:, x1] * wx
    return Frame(top * (1 - wy) + bot * wy, timestamp=frame.timestamp)
