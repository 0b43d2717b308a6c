"""Single-frame regressor: residual backbone + small FC head with ReLUs."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor
from .backbone import ResidualBackbone
from .config import ModelConfig, ModelOutput
from .layers import Linear, Module


class ResNetRegressor(Module):
    wants_flow = False

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        object.__setattr__(self, "config", config)
        self.backbone = ResidualBackbone(rng, config.backbone_channels, config.feature_dim)
        self.fc = Linear(rng, config.feature_dim, config.fused_dim)
        self.out = Linear(rng, config.fused_dim, 1)

    def forward(self, rgb: Tensor, flow: Tensor | None = None) -> ModelOutput:
        if rgb.ndim == 4:
            rgb = rgb.reshape((1,) + rgb.shape)
        if rgb.ndim != 5:
            raise DimensionError(f"expected [B, L, 3, H, W] frames, got {rgb.shape}")
        b, length = rgb.shape[0], rgb.shape[1]
        feats = self.backbone(rgb.reshape((b * length,) + rgb.shape[2:]))
        h = self.fc(feats).relu()
        angle = self.out(h).reshape(b, length)
        return ModelOutput(angle=angle)
