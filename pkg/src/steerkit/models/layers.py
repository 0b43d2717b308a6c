"""Building blocks shared by all architectures.

``Module`` auto-registers ``Tensor`` attributes as parameters and nested
modules (or lists of modules) as children, giving every parameter a
dotted path name for checkpoints.  Weight matrices use Kaiming-uniform
fan-in init; biases start at zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..tensor import Tensor, conv2d, layer_norm, matmul, pad2d, softmax


def kaiming_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def plain_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Container tracking parameters and submodules by attribute name."""

    def __setattr__(self, name, value):
        params = self.__dict__.setdefault("_params", {})
        modules = self.__dict__.setdefault("_modules", {})
        params.pop(name, None)
        modules.pop(name, None)
        if isinstance(value, Tensor):
            params[name] = value
        elif isinstance(value, Module):
            modules[name] = value
        elif isinstance(value, (list, tuple)) and value and all(isinstance(m, Module) for m in value):
            modules[name] = _ModuleList(value)
        object.__setattr__(self, name, value)

    def parameters(self) -> dict[str, Tensor]:
        """All trainable tensors, keyed by dotted path, in definition order."""
        out: dict[str, Tensor] = {}
        for name, t in self.__dict__.get("_params", {}).items():
            if t.requires_grad:
                out[name] = t
        for name, child in self.__dict__.get("_modules", {}).items():
            for sub, t in child.parameters().items():
                out[f"{name}.{sub}"] = t
        return out

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters().values())

    def zero_grad(self) -> None:
        for t in self.parameters().values():
            t.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters().items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise DimensionError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise DimensionError(f"parameter {name}: checkpoint shape {arr.shape} vs model {t.data.shape}")
            t.data = arr.copy()


class _ModuleList(Module):
    def __init__(self, items):
        for i, m in enumerate(items):
            setattr(self, str(i), m)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int):
        self.w = Tensor(kaiming_uniform(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.w) + self.b


class Conv(Module):
    """3x3/5x5 convolution; ``pad`` is explicit zero padding before the valid conv."""

    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int,
                 kernel: int, stride: int = 1, pad: int = 0):
        fan_in = c_in * kernel * kernel
        self.w = Tensor(kaiming_uniform(rng, (c_out, c_in, kernel, kernel), fan_in), requires_grad=True)
        self.b = Tensor(np.zeros(c_out), requires_grad=True)
        object.__setattr__(self, "stride", stride)
        object.__setattr__(self, "pad", pad)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(pad2d(x, self.pad), self.w, self.stride, self.b)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.shift = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.shift)


class MultiHeadAttention(Module):
    """Scaled dot-product attention with separate query/key/value sources.

    Self-attention passes the same tensor three times; the cross-modal
    flow branch passes RGB features as query and key sources and flow
    features as the value source, so the weights depend on RGB alone.
    """

    def __init__(self, rng: np.random.Generator, dim: int, heads: int):
        if dim % heads != 0:
            raise DimensionError(f"model dim {dim} not divisible by {heads} heads")
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "head_dim", dim // heads)
        self.wq = Linear(rng, dim, dim)
        self.wk = Linear(rng, dim, dim)
        self.wv = Linear(rng, dim, dim)
        self.wo = Linear(rng, dim, dim)

    def _split(self, x: Tensor) -> Tensor:
        b, length, dim = x.shape
        return x.reshape(b, length, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, q_src: Tensor, k_src: Tensor, v_src: Tensor) -> tuple[Tensor, Tensor]:
        if q_src.ndim != 3:
            raise DimensionError(f"attention expects [batch, seq, dim] inputs, got {q_src.shape}")
        b, length, dim = q_src.shape
        q = self._split(self.wq(q_src))
        k = self._split(self.wk(k_src))
        v = self._split(self.wv(v_src))
        scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(self.head_dim))
        weights = softmax(scores, axis=-1)  # [b, heads, L, L]
        ctx = matmul(weights, v).transpose(0, 2, 1, 3).reshape(b, length, dim)
        return self.wo(ctx), weights


def sinusoidal_encoding(seq_len: int, dim: int) -> np.ndarray:
    """Classic fixed position code: interleaved sin/cos over log frequencies."""
    pos = np.arange(seq_len, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, idx / dim)
    pe = np.zeros((seq_len, dim))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : dim // 2])
    return pe
