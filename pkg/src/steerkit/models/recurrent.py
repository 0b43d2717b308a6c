"""LSTM cell and the CNN-LSTM sequence baseline.

Per-frame backbone features feed two stacked LSTM layers; a small FC
head maps each hidden state to an angle, one per timestep.  Gates use
sigmoid, the candidate and output activations use tanh.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor, matmul, stack
from .backbone import ResidualBackbone
from .config import ModelConfig, ModelOutput
from .layers import Linear, Module, plain_uniform

# gate order inside the packed weight matrices
GATES = ("input", "forget", "cell", "output")


class LSTMCellParams(Module):
    """Packed weights for one LSTM layer: wx [in, 4H], wh [H, 4H], b [4H]."""

    def __init__(self, rng: np.random.Generator, input_dim: int, hidden: int):
        self.wx = Tensor(plain_uniform(rng, (input_dim, 4 * hidden), input_dim), requires_grad=True)
        self.wh = Tensor(plain_uniform(rng, (hidden, 4 * hidden), hidden), requires_grad=True)
        self.b = Tensor(np.zeros(4 * hidden), requires_grad=True)
        object.__setattr__(self, "hidden", hidden)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, params: LSTMCellParams) -> tuple[Tensor, Tensor]:
    """One step: c' = f*c + i*g and h' = o*tanh(c') with standard gates."""
    n = params.hidden
    if x.shape[-1] != params.wx.shape[0] or h.shape[-1] != n or c.shape[-1] != n:
        raise DimensionError(f"lstm_cell shapes inconsistent: x {x.shape}, h {h.shape}, c {c.shape}, "
                             f"hidden {n}")
    gates = matmul(x, params.wx) + matmul(h, params.wh) + params.b
    i = gates[..., 0 * n:1 * n].sigmoid()
    f = gates[..., 1 * n:2 * n].sigmoid()
    g = gates[..., 2 * n:3 * n].tanh()
    o = gates[..., 3 * n:4 * n].sigmoid()
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    return h_next, c_next


class CnnLstm(Module):
    wants_flow = False

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        object.__setattr__(self, "config", config)
        self.backbone = ResidualBackbone(rng, config.backbone_channels, config.feature_dim)
        cells = []
        d = config.feature_dim
        for _ in range(config.lstm_layers):
            cells.append(LSTMCellParams(rng, d, config.lstm_hidden))
            d = config.lstm_hidden
        self.cells = cells
        self.fc = Linear(rng, config.lstm_hidden, 64)
        self.out = Linear(rng, 64, 1)

    def forward(self, rgb: Tensor, flow: Tensor | None = None) -> ModelOutput:
        if rgb.ndim == 4:
            rgb = rgb.reshape((1,) + rgb.shape)
        b, length = rgb.shape[0], rgb.shape[1]
        if length != self.config.seq_len:
            raise DimensionError(f"sequence length {length} != configured {self.config.seq_len}")
        feats = self.backbone(rgb.reshape((b * length,) + rgb.shape[2:]))
        xs = feats.reshape(b, length, -1)

        for cell in self.cells:
            h = Tensor(np.zeros((b, cell.hidden)))
            c = Tensor(np.zeros((b, cell.hidden)))
            outs = []
            for t in range(length):
                h, c = lstm_cell(xs[:, t, :], h, c, cell)
                outs.append(h)
            xs = stack(outs, axis=1)

        hidden = self.fc(xs).relu()
        angle = self.out(hidden)[..., 0]
        return ModelOutput(angle=angle)
