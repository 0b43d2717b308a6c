"""Architecture hyperparameters and the forward-pass output record."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from ..errors import ContractError
from ..tensor import Tensor

MODEL_KINDS = ("dave2", "resnet_reg", "cnn_lstm", "dual_transformer", "simple_transformer")


@dataclass
class ModelConfig:
    kind: str = "dual_transformer"
    seq_len: int = 5
    feature_dim: int = 512
    heads: int = 4
    encoder_layers: int = 2
    ff_dim: int = 2048
    fused_dim: int = 128
    lstm_hidden: int = 256
    lstm_layers: int = 2
    backbone_channels: tuple[int, ...] = (16, 32, 64, 128)
    predict_speed: bool = True
    positional_encoding: bool = True
    image_h: int = 224
    image_w: int = 224

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ContractError(f"unknown model kind {self.kind!r} (expected one of {MODEL_KINDS})")
        if self.seq_len < 1:
            raise ContractError(f"seq_len must be >= 1, got {self.seq_len}")
        if self.feature_dim % self.heads != 0:
            raise ContractError(f"feature_dim {self.feature_dim} not divisible by heads {self.heads}")
        if self.kind != "dual_transformer" and self.predict_speed:
            raise ContractError(f"predict_speed is only supported by dual_transformer, not {self.kind}")
        if not self.backbone_channels:
            raise ContractError("backbone_channels must be nonempty")
        self.backbone_channels = tuple(int(c) for c in self.backbone_channels)
        if self.kind == "dave2":
            # fixed input contract of the architecture, regardless of config
            self.image_h, self.image_w = 120, 320

    def canonical(self) -> str:
        """Stable key=value serialization, used for checkpoint hashing."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> bytes:
        return hashlib.sha256(self.canonical().encode("ascii")).digest()


@dataclass
class ModelOutput:
    """Per-timestep predictions plus optional attention maps.

    ``angle`` is [batch, seq_len] radians; ``speed`` is the same shape in
    m/s when the model has a speed head.  ``attention`` holds one entry
    per encoder layer: rgb (and, for the dual model, flow) weight
    tensors of shape [batch, heads, seq_len, seq_len].
    """

    angle: Tensor
    speed: Tensor | None = None
    attention: list[dict[str, Tensor]] | None = field(default=None)
