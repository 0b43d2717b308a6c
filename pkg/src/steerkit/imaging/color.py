"""Vectorized RGB/HSV conversion and luminance extraction.

Hue is measured in degrees [0, 360); saturation and value in [0, 1].
The conversions are exact inverses away from the degenerate grays.
"""

from __future__ import annotations

import numpy as np


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Convert an H x W x 3 RGB array in [0,1] to HSV (hue in degrees)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc

    hue = np.zeros_like(maxc)
    mask = delta > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        rc = np.where(mask, (maxc - r) / delta, 0.0)
        gc = np.where(mask, (maxc - g) / delta, 0.0)
        bc = np.where(mask, (maxc - b) / delta, 0.0)
    hue = np.where(maxc == r, bc - gc, hue)
    hue = np.where((maxc == g) & (g != r), 2.0 + rc - bc, hue)
    hue = np.where((maxc == b) & (b != r) & (b != g), 4.0 + gc - rc, hue)
    hue = np.where(mask, (hue * 60.0) % 360.0, 0.0)

    sat = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    return np.stack([hue, sat, maxc], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Convert HSV (hue in degrees [0,360)) back to RGB in [0,1]."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    hp = (h % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    m = v - c

    sector = np.floor(hp).astype(np.int64) % 6
    zeros = np.zeros_like(c)
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an H x W x 3 RGB array."""
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
