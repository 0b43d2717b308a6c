"""Small residual CNN trained from scratch, used by every sequence model.

Interface: [B, 3, H, W] image batch in, [B, feature_dim] features out.
One residual block per width in ``channels``, stride-2 transitions
between widths, global average pooling, then a linear projection.  The
in-block convolutions are explicitly zero-padded so the identity skip
needs no cropping.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor
from .layers import Conv, Linear, Module


class ResidualBlock(Module):
    """Two padded 3x3 convolutions plus an identity skip: relu(x + F(x))."""

    def __init__(self, rng: np.random.Generator, channels: int):
        self.conv1 = Conv(rng, channels, channels, kernel=3, stride=1, pad=1)
        self.conv2 = Conv(rng, channels, channels, kernel=3, stride=1, pad=1)

    def __call__(self, x: Tensor) -> Tensor:
        return (x + self.conv2(self.conv1(x).relu())).relu()


class ResidualBackbone(Module):
    def __init__(self, rng: np.random.Generator, channels: tuple[int, ...], feature_dim: int):
        self.stem = Conv(rng, 3, channels[0], kernel=3, stride=2, pad=1)
        blocks = [ResidualBlock(rng, channels[0])]
        transitions = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            transitions.append(Conv(rng, c_in, c_out, kernel=3, stride=2, pad=1))
            blocks.append(ResidualBlock(rng, c_out))
        self.blocks = blocks
        self.transitions = transitions
        self.head = Linear(rng, channels[-1], feature_dim)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise DimensionError(f"backbone expects [B, 3, H, W], got {x.shape}")
        if x.shape[2] < 8 or x.shape[3] < 8:
            raise DimensionError(f"backbone input too small: {x.shape} (need at least 8x8)")
        h = self.stem(x).relu()
        h = self.blocks[0](h)
        for transition, block in zip(self.transitions, self.blocks[1:]):
            h = transition(h).relu()
            h = block(h)
        pooled = h.mean(axis=(2, 3))
        return self.head(pooled)
