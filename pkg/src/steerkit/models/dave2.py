"""The 9-layer single-frame CNN baseline.

Normalization, five convolutions (24/36/48 filters at 5x5 stride 2, then
64/64 at 3x3 stride 1, all valid), and a 100/50/10/1 fully connected
controller with ReLU between every trainable layer except the output.
The published conv arithmetic runs at 66x200, so the fixed input
contract of 3x120x320 is met by a non-trainable bilinear resize in the
normalization stage; the flattened feature length is 1152.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor, conv2d, interp_bilinear
from .config import ModelConfig, ModelOutput
from .layers import Linear, Module, kaiming_uniform

IN_H, IN_W = 120, 320
NET_H, NET_W = 66, 200

# (filters, kernel, stride) for the five valid convolutions
CONV_PLAN = ((24, 5, 2), (36, 5, 2), (48, 5, 2), (64, 3, 1), (64, 3, 1))
FC_PLAN = (100, 50, 10)


def conv_output_extent(n: int, kernel: int, stride: int) -> int:
    return (n - kernel) // stride + 1


def shape_plan(h: int = NET_H, w: int = NET_W) -> list[dict]:
    """Per-layer output sizes under floor((n-k)/s)+1, plus the flatten length."""
    rows = []
    c = 3
    for filters, kernel, stride in CONV_PLAN:
        h = conv_output_extent(h, kernel, stride)
        w = conv_output_extent(w, kernel, stride)
        c = filters
        rows.append({"channels": c, "h": h, "w": w})
    rows.append({"flatten": c * h * w})
    return rows


class Dave2(Module):
    wants_flow = False

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        object.__setattr__(self, "config", config)
        convs = []
        c_in = 3
        for filters, kernel, stride in CONV_PLAN:
            fan_in = c_in * kernel * kernel
            w = Tensor(kaiming_uniform(rng, (filters, c_in, kernel, kernel), fan_in), requires_grad=True)
            b = Tensor(np.zeros(filters), requires_grad=True)
            convs.append(_ValidConv(w, b, stride))
            c_in = filters
        self.convs = convs
        flat = shape_plan()[-1]["flatten"]
        fcs = []
        d = flat
        for width in FC_PLAN:
            fcs.append(Linear(rng, d, width))
            d = width
        self.fcs = fcs
        self.out = Linear(rng, d, 1)

    def forward(self, rgb: Tensor, flow: Tensor | None = None) -> ModelOutput:
        """Angle per frame; input is [B, L, 3, 120, 320] (L is typically 1)."""
        if rgb.ndim == 4:
            rgb = rgb.reshape((1,) + rgb.shape)
        b, length = rgb.shape[0], rgb.shape[1]
        if rgb.shape[2:] != (3, IN_H, IN_W):
            raise DimensionError(f"dave2 requires 3x{IN_H}x{IN_W} frames, got {rgb.shape[2:]}")
        x = rgb.reshape(b * length, 3, IN_H, IN_W)
        x = interp_bilinear(x, NET_H, NET_W)
        x = (x - 0.5) * 2.0
        for conv in self.convs:
            x = conv(x).relu()
        x = x.reshape(b * length, -1)
        for fc in self.fcs:
            x = fc(x).relu()
        angle = self.out(x).reshape(b, length)
        return ModelOutput(angle=angle)


class _ValidConv(Module):
    def __init__(self, w: Tensor, b: Tensor, stride: int):
        self.w = w
        self.b = b
        object.__setattr__(self, "stride", stride)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, self.stride, self.b)
