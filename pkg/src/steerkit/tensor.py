"""Dense fp64 tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a row-major ``numpy.float64`` array together with an
optional gradient accumulator.  Operations record a tape on the fly
(parents plus a backward closure); calling :meth:`Tensor.backward` on a
scalar result walks the tape once in reverse topological order and
accumulates exact reverse-mode derivatives into every leaf that has
``requires_grad`` set.

Everything is double precision so that the central-difference oracle in
:func:`grad_check` is meaningful down to ~1e-8 relative error.

Quick example::

    x = Tensor([[1.0, 2.0]], requires_grad=True)
    y = (x @ x.transpose(1, 0)).sum()
    y.backward()
    x.grad        # -> array([[2., 4.]])
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

Array = np.ndarray

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(data) -> Array:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # Extra leading axes introduced by broadcasting.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    # Axes that were stretched from extent 1.
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """N-dimensional fp64 array with an optional gradient record.

    ``data`` is always a ``float64`` ndarray; ``grad`` is ``None`` until a
    backward pass deposits into it, after which it has the same shape as
    ``data``.  Repeated backward passes accumulate (call :meth:`zero_grad`
    between optimizer steps).
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None
        self._op = "leaf"

    @classmethod
    def _from_op(cls, data: Array, parents: tuple, backward, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        out._op = op
        return out

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- autodiff machinery ---------------------------------------------------

    def _accumulate(self, g: Array) -> None:
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.data.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar root.

        Visits every recorded node exactly once in reverse topological order
        and accumulates gradients into all ``requires_grad`` leaves.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() root must be scalar, got shape {self.shape}")
        if not self.requires_grad:
            return

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data + other.data

        def bw(g):
            self.requires_grad and self._accumulate(g)
            other.requires_grad and other._accumulate(g)

        return Tensor._from_op(out_data, (self, other), bw, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def bw(g):
            self._accumulate(-g)

        return Tensor._from_op(-self.data, (self,), bw, "neg")

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data - other.data

        def bw(g):
            self.requires_grad and self._accumulate(g)
            other.requires_grad and other._accumulate(-g)

        return Tensor._from_op(out_data, (self, other), bw, "sub")

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data * other.data

        def bw(g):
            self.requires_grad and self._accumulate(g * other.data)
            other.requires_grad and other._accumulate(g * self.data)

        return Tensor._from_op(out_data, (self, other), bw, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out_data = self.data / other.data

        def bw(g):
            self.requires_grad and self._accumulate(g / other.data)
            other.requires_grad and other._accumulate(-g * self.data / (other.data * other.data))

        return Tensor._from_op(out_data, (self, other), bw, "div")

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        e = float(exponent)
        out_data = self.data ** e

        def bw(g):
            self._accumulate(g * e * self.data ** (e - 1.0))

        return Tensor._from_op(out_data, (self,), bw, "pow")

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    # -- shape manipulation -----------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out_data = self.data.reshape(shape)

        def bw(g):
            self._accumulate(g.reshape(old))

        return Tensor._from_op(out_data, (self,), bw, "reshape")

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        out_data = self.data.transpose(axes)

        def bw(g):
            self._accumulate(g.transpose(inv))

        return Tensor._from_op(out_data, (self,), bw, "transpose")

    def __getitem__(self, idx) -> "Tensor":
        out_data = self.data[idx]

        def bw(g):
            dx = np.zeros_like(self.data)
            np.add.at(dx, idx, g)
            self._accumulate(dx)

        return Tensor._from_op(out_data, (self,), bw, "getitem")

    # -- reductions ---------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        in_shape = self.data.shape

        def bw(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, in_shape))
                return
            gg = g
            if not keepdims:
                gg = np.expand_dims(gg, axis)
            self._accumulate(np.broadcast_to(gg, in_shape))

        return Tensor._from_op(np.asarray(out_data), (self,), bw, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            n = 1
            for a in axes:
                n *= self.data.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- pointwise nonlinearities ----------------------------------------------------

    def relu(self) -> "Tensor":
        out_data = np.maximum(self.data, 0.0)

        def bw(g):
            self._accumulate(g * (self.data > 0.0))

        return Tensor._from_op(out_data, (self,), bw, "relu")

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)

        def bw(g):
            self._accumulate(g * (1.0 - t * t))

        return Tensor._from_op(t, (self,), bw, "tanh")

    def sigmoid(self) -> "Tensor":
        # Split by sign so exp never overflows.
        x = self.data
        s = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

        def bw(g):
            self._accumulate(g * s * (1.0 - s))

        return Tensor._from_op(s, (self,), bw, "sigmoid")

    def sqrt(self) -> "Tensor":
        r = np.sqrt(self.data)

        def bw(g):
            self._accumulate(g * 0.5 / r)

        return Tensor._from_op(r, (self,), bw, "sqrt")

    def abs(self) -> "Tensor":
        out_data = np.abs(self.data)

        def bw(g):
            self._accumulate(g * np.sign(self.data))

        return Tensor._from_op(out_data, (self,), bw, "abs")

    def exp(self) -> "Tensor":
        e = np.exp(self.data)

        def bw(g):
            self._accumulate(g * e)

        return Tensor._from_op(e, (self,), bw, "exp")


# -- free functions ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Stacked matrix product ``a @ b`` over the last two axes.

    Both operands need ``ndim >= 2``; leading axes broadcast.  Backward is
    ``dA = dC @ B^T`` and ``dB = A^T @ dC`` (summed over broadcast axes).
    """
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs ndim >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(np.matmul(g, b.data.swapaxes(-1, -2)))
        if b.requires_grad:
            b._accumulate(np.matmul(a.data.swapaxes(-1, -2), g))

    return Tensor._from_op(out_data, (a, b), bw, "matmul")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (max-subtracted).

    Output entries are positive and sum to 1 along ``axis``; adding a
    constant to the inputs leaves the result unchanged.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        x._accumulate(y * (g - dot))

    return Tensor._from_op(y, (x,), bw, "softmax")


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift.

    ``eps`` is added to the variance, so a constant vector maps to all
    zeros before gain/shift rather than dividing by zero.
    """
    if x.shape[-1] < 2:
        raise DimensionError(f"layer_norm needs last-axis length >= 2, got {x.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normed = centered / (var + eps).sqrt()
    return normed * gain + shift


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis``; backward splits the gradient back."""
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of an empty list")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._from_op(out_data, tuple(tensors), bw, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack equal-shape tensors along a new axis."""
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("stack of an empty list")
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        slices = np.moveaxis(g, axis, 0)
        for t, gt in zip(tensors, slices):
            if t.requires_grad:
                t._accumulate(gt)

    return Tensor._from_op(out_data, tuple(tensors), bw, "stack")


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the last two axes by ``pad`` on every side."""
    if pad == 0:
        return x
    width = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (pad, pad)]
    out_data = np.pad(x.data, width)
    sl = tuple([slice(None)] * (x.ndim - 2) + [slice(pad, -pad), slice(pad, -pad)])

    def bw(g):
        x._accumulate(g[sl])

    return Tensor._from_op(out_data, (x,), bw, "pad2d")


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, bias: Tensor | None = None) -> Tensor:
    """Valid cross-correlation of ``x`` with ``kernels``.

    ``x`` is ``[C_in, H, W]`` or batched ``[B, C_in, H, W]``; ``kernels`` is
    ``[C_out, C_in, kh, kw]``; output spatial extent is
    ``floor((n - k) / stride) + 1`` per axis.  No implicit padding: use
    :func:`pad2d` first for shape-preserving convolutions.
    """
    squeeze = x.ndim == 3
    xb = x.reshape((1,) + x.shape) if squeeze else x
    if xb.ndim != 4 or kernels.ndim != 4:
        raise DimensionError(f"conv2d expects [B,C,H,W] and [O,C,kh,kw], got {x.shape} and {kernels.shape}")
    B, C, H, W = xb.shape
    O, CK, kh, kw = kernels.shape
    if CK != C:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape} vs kernels {kernels.shape}")
    if kh > H or kw > W:
        raise DimensionError(f"conv2d kernel {kernels.shape} larger than input {x.shape}")
    if stride < 1:
        raise ContractError(f"conv2d stride must be positive, got {stride}")
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1

    # im2col: one strided slice per kernel offset, then a single GEMM.
    cols = np.empty((B, C, kh * kw, Ho * Wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            patch = xb.data[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride]
            cols[:, :, i * kw + j, :] = patch.reshape(B, C, Ho * Wo)
    cols = cols.reshape(B, C * kh * kw, Ho * Wo)
    kmat = kernels.data.reshape(O, C * kh * kw)
    out = np.matmul(kmat, cols)  # [B, O, Ho*Wo]
    if bias is not None:
        out = out + bias.data.reshape(1, O, 1)
    out = out.reshape(B, O, Ho, Wo)

    parents = (xb, kernels) if bias is None else (xb, kernels, bias)

    def bw(g):
        gm = g.reshape(B, O, Ho * Wo)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gm.sum(axis=(0, 2)))
        if kernels.requires_grad:
            dk = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0)
            kernels._accumulate(dk.reshape(O, C, kh, kw))
        if xb.requires_grad:
            dcols = np.matmul(kmat.T, gm)  # [B, C*kh*kw, Ho*Wo]
            dcols = dcols.reshape(B, C, kh * kw, Ho, Wo)
            dx = np.zeros((B, C, H, W), dtype=np.float64)
            for i in range(kh):
                for j in range(kw):
                    dx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i * kw + j]
            xb._accumulate(dx)

    out_t = Tensor._from_op(out, parents, bw, "conv2d")
    return out_t.reshape(out.shape[1:]) if squeeze else out_t


def _bilinear_axis(n_in: int, n_out: int):
    # align_corners=False sampling grid shared with the image pipeline
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    lo = np.clip(np.floor(src), 0, n_in - 1).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    w_hi = np.clip(src - lo, 0.0, 1.0)
    return lo, hi, w_hi


def interp_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of the last two axes (align_corners=False)."""
    if out_h < 2 or out_w < 2:
        raise ContractError(f"interp_bilinear output dims must be >= 2, got {out_h}x{out_w}")
    H, W = x.shape[-2], x.shape[-1]
    y0, y1, wy = _bilinear_axis(H, out_h)
    x0, x1, wx = _bilinear_axis(W, out_w)
    wy = wy.reshape(-1, 1)
    wx = wx.reshape(1, -1)

    d = x.data
    top = d[..., y0, :]
    bot = d[..., y1, :]
    rows = top * (1.0 - wy) + bot * wy
    out = rows[..., :, x0] * (1.0 - wx) + rows[..., :, x1] * wx

    def bw(g):
        g_rows = np.zeros(d.shape[:-2] + (out_h, W), dtype=np.float64)
        np.add.at(g_rows, (..., x0), g * (1.0 - wx))
        np.add.at(g_rows, (..., x1), g * wx)
        dx = np.zeros_like(d)
        np.add.at(dx, (..., y0, slice(None)), g_rows * (1.0 - wy))
        np.add.at(dx, (..., y1, slice(None)), g_rows * wy)
        x._accumulate(dx)

    return Tensor._from_op(out, (x,), bw, "interp_bilinear")


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-6,
               max_coords: int | None = None) -> float:
    """Max relative error between reverse-mode and central-difference grads.

    ``f`` must be scalar-valued.  The error per coordinate is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.  For large
    tensors ``max_coords`` caps the sweep to an evenly spaced subset.
    """
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    if out.data.size != 1:
        raise ContractError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)
    analytic = analytic.reshape(-1)

    flat = x.data.reshape(-1).copy()
    n = flat.size
    if max_coords is not None and n > max_coords:
        coords = np.unique(np.linspace(0, n - 1, max_coords).astype(np.int64))
    else:
        coords = np.arange(n)

    worst = 0.0
    with no_grad():
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(Tensor(flat.reshape(x.shape))).item()
            flat[i] = orig - h
            fm = f(Tensor(flat.reshape(x.shape))).item()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            denom = max(1.0, abs(analytic[i]), abs(numeric))
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
