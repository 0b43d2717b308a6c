"""The four architectures plus the flow-ablated transformer variant."""

from __future__ import annotations

import numpy as np

from .backbone import ResidualBackbone, ResidualBlock
from .checkpoint import load_checkpoint, save_checkpoint
from .config import MODEL_KINDS, ModelConfig, ModelOutput
from .dave2 import Dave2
from .layers import LayerNorm, Linear, Module, MultiHeadAttention, sinusoidal_encoding
from .recurrent import CnnLstm, LSTMCellParams, lstm_cell
from .regressor import ResNetRegressor
from .transformer import CrossModalEncoderLayer, DualTransformer, EncoderBranch, SimpleTransformer

_REGISTRY = {
    "dave2": Dave2,
    "resnet_reg": ResNetRegressor,
    "cnn_lstm": CnnLstm,
    "dual_transformer": DualTransformer,
    "simple_transformer": SimpleTransformer,
}


def build_model(config: ModelConfig, seed: int = 0):
    """Instantiate the configured architecture with seeded weight init."""
    rng = np.random.default_rng(seed)
    return _REGISTRY[config.kind](config, rng)


__all__ = [
    "MODEL_KINDS",
    "CnnLstm",
    "CrossModalEncoderLayer",
    "Dave2",
    "DualTransformer",
    "EncoderBranch",
    "LayerNorm",
    "Linear",
    "LSTMCellParams",
    "ModelConfig",
    "ModelOutput",
    "Module",
    "MultiHeadAttention",
    "ResidualBackbone",
    "ResidualBlock",
    "ResNetRegressor",
    "SimpleTransformer",
    "build_model",
    "load_checkpoint",
    "lstm_cell",
    "save_checkpoint",
    "sinusoidal_encoding",
]
