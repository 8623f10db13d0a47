"""Differentiable operators over tape tensors.

Elementwise ops require equal shapes (no implicit broadcasting beyond the
conv bias); shape problems raise rather than broadcast surprisingly.  Each
backward rule adds into parent gradients only when the parent asks for them.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from dualdepth.errors import InputError
from dualdepth.autodiff.tensor import Graph, Tensor, record, same_graph


def _check_same_shape(a: Tensor, b: Tensor):
    if a.data.shape != b.data.shape:
        raise InputError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    g = same_graph(a, b)
    _check_same_shape(a, b)

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad)
        if b.requires_grad:
            b.accumulate(grad)

    return record(g, a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    g = same_graph(a, b)
    _check_same_shape(a, b)

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad)
        if b.requires_grad:
            b.accumulate(-grad)

    return record(g, a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    g = same_graph(a, b)
    _check_same_shape(a, b)

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad * b.data)
        if b.requires_grad:
            b.accumulate(grad * a.data)

    return record(g, a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    g = same_graph(a, b)
    _check_same_shape(a, b)

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad / b.data)
        if b.requires_grad:
            b.accumulate(-grad * a.data / np.square(b.data))

    return record(g, a.data / b.data, (a, b), backward)


def add_scalar(x: Tensor, c: float) -> Tensor:
    def backward(grad):
        x.accumulate(grad)

    return record(x.graph, x.data + c, (x,), backward)


def mul_scalar(x: Tensor, c: float) -> Tensor:
    def backward(grad):
        x.accumulate(grad * c)

    return record(x.graph, x.data * c, (x,), backward)


def square(x: Tensor) -> Tensor:
    def backward(grad):
        x.accumulate(grad * 2.0 * x.data)

    return record(x.graph, np.square(x.data), (x,), backward)


def sqrt(x: Tensor) -> Tensor:
    if np.any(x.data < 0):
        raise InputError("sqrt of negative values")
    out_data = np.sqrt(x.data)

    def backward(grad):
        x.accumulate(grad / (2.0 * out_data))

    return record(x.graph, out_data, (x,), backward)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise InputError("log of nonpositive values")

    def backward(grad):
        x.accumulate(grad / x.data)

    return record(x.graph, np.log(x.data), (x,), backward)


def absolute(x: Tensor) -> Tensor:
    def backward(grad):
        x.accumulate(grad * np.sign(x.data))

    return record(x.graph, np.abs(x.data), (x,), backward)


def clamp(x: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    out_data = np.clip(x.data, lo, hi)

    def backward(grad):
        inside = np.ones_like(x.data, dtype=bool)
        if lo is not None:
            inside &= x.data > lo
        if hi is not None:
            inside &= x.data < hi
        x.accumulate(grad * inside)

    return record(x.graph, out_data, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(grad):
        x.accumulate(np.full_like(x.data, grad.reshape(())))

    return record(x.graph, x.data.sum().reshape(1, 1, 1, 1), (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    size = x.data.size

    def backward(grad):
        x.accumulate(np.full_like(x.data, grad.reshape(()) / size))

    return record(x.graph, x.data.mean().reshape(1, 1, 1, 1), (x,), backward)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    pos = x.data > 0

    def backward(grad):
        x.accumulate(grad * np.where(pos, 1.0, slope))

    return record(x.graph, np.where(pos, x.data, x.data * slope), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def backward(grad):
        x.accumulate(grad * out_data * (1.0 - out_data))

    return record(x.graph, out_data, (x,), backward)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation: x (n,c,h,w) * w (oc,c,kh,kw) + b (1,oc,1,1)."""
    g = same_graph(x, w, b)
    n, c, h, wd = x.data.shape
    if w.data.ndim != 4 or w.data.shape[1] != c:
        raise InputError(f"kernel {w.data.shape} does not accept {c} input channels")
    oc, _, kh, kw = w.data.shape
    if b.data.shape != (1, oc, 1, 1):
        raise InputError(f"bias must be (1,{oc},1,1), got {b.data.shape}")
    if stride < 1 or padding < 0:
        raise InputError("stride must be >=1 and padding >=0")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise InputError(f"kernel {kh}x{kw} does not fit input {h}x{wd} with padding {padding}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * oh * ow, c * kh * kw)
    w2 = w.data.reshape(oc, -1)
    out = (cols @ w2.T).reshape(n, oh, ow, oc).transpose(0, 3, 1, 2) + b.data

    def backward(grad):
        g2 = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(-1, oc)
        if b.requires_grad:
            b.accumulate(g2.sum(axis=0).reshape(1, oc, 1, 1))
        if w.requires_grad:
            w.accumulate((g2.T @ cols).reshape(w.data.shape))
        if x.requires_grad:
            dcols = (g2 @ w2).reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += dcols[
                        :, :, :, :, i, j
                    ]
            if padding:
                x.accumulate(dxp[:, :, padding : padding + h, padding : padding + wd])
            else:
                x.accumulate(dxp)

    return record(g, out, (x, w, b), backward)


def avg_pool2(x: Tensor) -> Tensor:
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise InputError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(grad):
        up = np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3)
        x.accumulate(up * 0.25)

    return record(x.graph, out, (x,), backward)


def upsample_nearest2(x: Tensor) -> Tensor:
    n, c, h, w = x.data.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(grad):
        x.accumulate(grad.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return record(x.graph, out, (x,), backward)


def concat_channels(xs: list[Tensor]) -> Tensor:
    if not xs:
        raise InputError("concat_channels needs at least one tensor")
    g = same_graph(*xs)
    first = xs[0].data.shape
    for t in xs[1:]:
        s = t.data.shape
        if (s[0], s[2], s[3]) != (first[0], first[2], first[3]):
            raise InputError(f"concat_channels spatial/batch mismatch: {first} vs {s}")
    splits = np.cumsum([t.data.shape[1] for t in xs])[:-1]

    def backward(grad):
        for t, piece in zip(xs, np.split(grad, splits, axis=1)):
            if t.requires_grad:
                t.accumulate(piece)

    return record(g, np.concatenate([t.data for t in xs], axis=1), tuple(xs), backward)


def shift2d(x: Tensor, dv: int, du: int) -> Tensor:
    """out[v,u] = x[v+dv, u+du], replicating the border rows/columns."""
    n, c, h, w = x.data.shape
    idx_v = np.clip(np.arange(h) + dv, 0, h - 1)
    idx_u = np.clip(np.arange(w) + du, 0, w - 1)
    out = x.data[:, :, idx_v, :][:, :, :, idx_u]

    def backward(grad):
        tmp = np.zeros_like(x.data)
        np.add.at(tmp, (slice(None), slice(None), slice(None), idx_u), grad)
        dx = np.zeros_like(x.data)
        np.add.at(dx, (slice(None), slice(None), idx_v, slice(None)), tmp)
        x.accumulate(dx)

    return record(x.graph, out, (x,), backward)
