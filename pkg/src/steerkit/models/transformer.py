"""Dual-branch RGB/flow transformer and its flow-ablated variant.

Each encoder layer runs two streams.  The RGB stream is ordinary
self-attention.  The flow stream is the interesting part: its attention
weights are computed from projections of the *RGB* features (query and
key both), and only the values are projections of the flow features.
Perturbing the flow inputs therefore cannot change the flow-branch
attention pattern, only what it aggregates.

After the encoder stack the two streams are concatenated per timestep,
fused back to the model width, reduced to a small embedding, and read
out by linear angle/speed heads.  The ablated variant keeps just the
RGB stream and the angle head.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from ..tensor import Tensor, concat
from .backbone import ResidualBackbone
from .config import ModelConfig, ModelOutput
from .layers import LayerNorm, Linear, Module, MultiHeadAttention, sinusoidal_encoding


class FeedForward(Module):
    def __init__(self, rng: np.random.Generator, dim: int, inner: int):
        self.lin1 = Linear(rng, dim, inner)
        self.lin2 = Linear(rng, inner, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(self.lin1(x).relu())


class EncoderBranch(Module):
    """Attention + post-norm residual + feedforward for one stream."""

    def __init__(self, rng: np.random.Generator, dim: int, heads: int, ff_dim: int):
        self.attn = MultiHeadAttention(rng, dim, heads)
        self.norm1 = LayerNorm(dim)
        self.ff = FeedForward(rng, dim, ff_dim)
        self.norm2 = LayerNorm(dim)

    def attend(self, q_src: Tensor, k_src: Tensor, v_src: Tensor) -> tuple[Tensor, Tensor]:
        attended, weights = self.attn(q_src, k_src, v_src)
        x = self.norm1(v_src + attended)
        x = self.norm2(x + self.ff(x))
        return x, weights


class CrossModalEncoderLayer(Module):
    """One encoder layer over the paired RGB and flow streams.

    RGB: self-attention.  Flow: query and key come from the RGB stream,
    values from the flow stream, so attn_flow is a function of RGB only.
    """

    def __init__(self, rng: np.random.Generator, dim: int, heads: int, ff_dim: int):
        self.rgb = EncoderBranch(rng, dim, heads, ff_dim)
        self.flow = EncoderBranch(rng, dim, heads, ff_dim)

    def __call__(self, rgb: Tensor, flow: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        if rgb.shape != flow.shape:
            raise DimensionError(f"stream shapes differ: rgb {rgb.shape} vs flow {flow.shape}")
        rgb_out, attn_rgb = self.rgb.attend(rgb, rgb, rgb)
        flow_out, attn_flow = self.flow.attend(rgb, rgb, flow)
        return rgb_out, flow_out, attn_rgb, attn_flow


class DualTransformer(Module):
    wants_flow = True

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        object.__setattr__(self, "config", config)
        d = config.feature_dim
        self.backbone_rgb = ResidualBackbone(rng, config.backbone_channels, d)
        self.backbone_flow = ResidualBackbone(rng, config.backbone_channels, d)
        self.layers = [CrossModalEncoderLayer(rng, d, config.heads, config.ff_dim)
                       for _ in range(config.encoder_layers)]
        self.fuse = Linear(rng, 2 * d, d)
        self.reduce = Linear(rng, d, config.fused_dim)
        self.angle_head = Linear(rng, config.fused_dim, 1)
        if config.predict_speed:
            self.speed_head = Linear(rng, config.fused_dim, 1)
        pe = sinusoidal_encoding(config.seq_len, d) if config.positional_encoding else np.zeros((config.seq_len, d))
        self.position_code = Tensor(pe)  # fixed, not trained

    def _features(self, backbone: ResidualBackbone, seq: Tensor) -> Tensor:
        b, length = seq.shape[0], seq.shape[1]
        feats = backbone(seq.reshape((b * length,) + seq.shape[2:]))
        return feats.reshape(b, length, -1) + self.position_code

    def forward(self, rgb: Tensor, flow: Tensor | None = None) -> ModelOutput:
        """Sequences in, per-timestep angle/speed and attention maps out.

        ``flow[t]`` is the rendered flow between frames t-1 and t (zero
        flow, hence a black image, at t = 0).
        """
        if flow is None:
            raise ContractError("dual transformer requires a flow sequence")
        if rgb.ndim == 4:
            rgb = rgb.reshape((1,) + rgb.shape)
        if flow.ndim == 4:
            flow = flow.reshape((1,) + flow.shape)
        if rgb.shape != flow.shape:
            raise DimensionError(f"rgb {rgb.shape} and flow {flow.shape} sequences must match")
        if rgb.shape[1] != self.config.seq_len:
            raise DimensionError(f"sequence length {rgb.shape[1]} != configured {self.config.seq_len}")

        r = self._features(self.backbone_rgb, rgb)
        f = self._features(self.backbone_flow, flow)

        attention = []
        for layer in self.layers:
            r, f, attn_rgb, attn_flow = layer(r, f)
            attention.append({"rgb": attn_rgb, "flow": attn_flow})

        z = self.fuse(concat([r, f], axis=-1)).relu()
        z = self.reduce(z).relu()
        angle = self.angle_head(z)[..., 0]
        speed = self.speed_head(z)[..., 0] if self.config.predict_speed else None
        return ModelOutput(angle=angle, speed=speed, attention=attention)


class SimpleTransformer(Module):
    """Ablation: flow branch, fusion concat, and speed head removed."""

    wants_flow = False

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        object.__setattr__(self, "config", config)
        d = config.feature_dim
        self.backbone_rgb = ResidualBackbone(rng, config.backbone_channels, d)
        self.layers = [EncoderBranch(rng, d, config.heads, config.ff_dim)
                       for _ in range(config.encoder_layers)]
        self.fuse = Linear(rng, d, d)
        self.reduce = Linear(rng, d, config.fused_dim)
        self.angle_head = Linear(rng, config.fused_dim, 1)
        pe = sinusoidal_encoding(config.seq_len, d) if config.positional_encoding else np.zeros((config.seq_len, d))
        self.position_code = Tensor(pe)

    def forward(self, rgb: Tensor, flow: Tensor | None = None) -> ModelOutput:
        if flow is not None:
            raise ContractError("simple transformer takes no flow input")
        if rgb.ndim == 4:
            rgb = rgb.reshape((1,) + rgb.shape)
        if rgb.shape[1] != self.config.seq_len:
            raise DimensionError(f"sequence length {rgb.shape[1]} != configured {self.config.seq_len}")
        b, length = rgb.shape[0], rgb.shape[1]
        feats = self.backbone_rgb(rgb.reshape((b * length,) + rgb.shape[2:]))
        r = feats.reshape(b, length, -1) + self.position_code

        attention = []
        for layer in self.layers:
            r, attn_rgb = layer.attend(r, r, r)
            attention.append({"rgb": attn_rgb})

        z = self.fuse(r).relu()
        z = self.reduce(z).relu()
        angle = self.angle_head(z)[..., 0]
        return ModelOutput(angle=angle, attention=attention)
