"""Differentiable ops over ``Tensor``.

Image tensors use the batch×channels×height×width layout. Reductions,
convolutions and dense layers accumulate in float64 and cast back to the
input dtype. Each op computes
its forward value with numpy and hands the graph a vector-Jacobian product
that skips inputs the graph does not track.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from src.tensor.graph import Tensor, record

logger = logging.getLogger(__name__)

Activation = Literal["relu", "sigmoid", "tanh"]
PoolMode = Literal["avg", "max"]


def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so ``grad`` matches ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    if isinstance(b, Tensor):
        return as_tensor(a, like=b), b
    return as_tensor(a), as_tensor(b)


# -- elementwise -----------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [
            _unbroadcast(g, x.shape) if needs[0] else None,
            _unbroadcast(g, y.shape) if needs[1] else None,
        ]

    return record("add", (x, y), x.data + y.data, vjp)


def subtract(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [
            _unbroadcast(g, x.shape) if needs[0] else None,
            _unbroadcast(-g, y.shape) if needs[1] else None,
        ]

    return record("subtract", (x, y), x.data - y.data, vjp)


def multiply(a: Any, b: Any) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    x, y = _pair(a, b)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [
            _unbroadcast(g * y.data, x.shape) if needs[0] else None,
            _unbroadcast(g * x.data, y.shape) if needs[1] else None,
        ]

    return record("multiply", (x, y), x.data * y.data, vjp)


def divide(a: Any, b: Any) -> Tensor:
    x, y = _pair(a, b)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [
            _unbroadcast(g / y.data, x.shape) if needs[0] else None,
            _unbroadcast(-g * x.data / (y.data * y.data), y.shape) if needs[1] else None,
        ]

    return record("divide", (x, y), x.data / y.data, vjp)


def negative(x: Tensor) -> Tensor:
    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [-g]

    return record("negative", (x,), -x.data, vjp)


def square(x: Tensor) -> Tensor:
    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [2 * g * x.data]

    return record("square", (x,), x.data * x.data, vjp)


def activate(x: Tensor, kind: Activation) -> Tensor:
    """Elementwise nonlinearity. relu'(0) is 0."""
    if kind == "relu":
        mask = x.data > 0
        out = np.where(mask, x.data, 0).astype(x.dtype)

        def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
            return [g * mask]

    elif kind == "sigmoid":
        out = expit(x.data).astype(x.dtype)

        def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
            return [g * out * (1 - out)]

    elif kind == "tanh":
        out = np.tanh(x.data)

        def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
            return [g * (1 - out * out)]

    else:
        raise ValueError(f"unknown activation {kind!r}")
    return record(kind, (x,), out, vjp)


def relu(x: Tensor) -> Tensor:
    return activate(x, "relu")


def sigmoid(x: Tensor) -> Tensor:
    return activate(x, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    return activate(x, "tanh")


# -- reductions and shape ops ------------------------------------------------------


def _normalize_axes(axis: int | tuple[int, ...] | None, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else axis
    return tuple(a % ndim for a in axes)


def sum(x: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, x.ndim)
    out = np.sum(x.data, axis=axes, dtype=np.float64).astype(x.dtype)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [np.broadcast_to(np.expand_dims(g, axes), x.shape).copy()]

    return record("sum", (x,), out, vjp)


def mean(x: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = np.mean(x.data, axis=axes, dtype=np.float64).astype(x.dtype)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [np.broadcast_to(np.expand_dims(g, axes) / count, x.shape).astype(x.dtype)]

    return record("mean", (x,), out, vjp)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [g.reshape(x.shape)]

    return record("reshape", (x,), x.data.reshape(shape), vjp)


def flatten(x: Tensor) -> Tensor:
    """Collapse every axis after the batch axis."""
    return reshape(x, (x.shape[0], -1))


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not xs:
        raise ValueError("concat needs at least one tensor")
    if len(xs) == 1:
        return xs[0]
    ndim = xs[0].ndim
    axis = axis % ndim
    for t in xs[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != xs[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise ValueError(
                f"concat along axis {axis}: inconsistent shapes {[t.shape for t in xs]}"
            )
    out = np.concatenate([t.data for t in xs], axis=axis)
    offsets = np.cumsum([t.shape[axis] for t in xs])[:-1]

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        parts = np.split(g, offsets, axis=axis)
        return [part if need else None for part, need in zip(parts, needs, strict=True)]

    return record("concat", tuple(xs), out, vjp)


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels start..stop-1 of an image tensor (a frame of a stacked sequence)."""
    if not 0 <= start < stop <= x.shape[1]:
        raise ValueError(f"channel slice [{start}, {stop}) outside {x.shape[1]} channels")

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return [full]

    return record("channel_slice", (x,), x.data[:, start:stop].copy(), vjp)


def crop(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    """Spatial window of an image tensor."""
    H, W = x.shape[-2:]
    if top < 0 or left < 0 or top + height > H or left + width > W:
        raise ValueError(f"crop box ({top}, {left}, {height}, {width}) outside {H}x{W}")
    box = (..., slice(top, top + height), slice(left, left + width))

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        full = np.zeros_like(x.data)
        full[box] = g
        return [full]

    return record("crop", (x,), x.data[box].copy(), vjp)


def paste(x: Tensor, patch: Tensor, top: int, left: int) -> Tensor:
    """Copy of ``x`` with ``patch`` written over the box at (top, left)."""
    height, width = patch.shape[-2:]
    H, W = x.shape[-2:]
    if top < 0 or left < 0 or top + height > H or left + width > W:
        raise ValueError(f"paste box ({top}, {left}, {height}, {width}) outside {H}x{W}")
    box = (..., slice(top, top + height), slice(left, left + width))
    out = x.data.copy()
    out[box] = patch.data

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        gx = None
        if needs[0]:
            gx = g.copy()
            gx[box] = 0
        return [gx, g[box].copy() if needs[1] else None]

    return record("paste", (x, patch), out, vjp)


def with_surrogate_gradient(value: np.ndarray, surrogate: Tensor) -> Tensor:
    """Tensor whose forward value is ``value`` and whose gradient flows into ``surrogate``."""
    value = np.asarray(value, dtype=surrogate.dtype).reshape(surrogate.shape)

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        return [g]

    return record("surrogate", (surrogate,), value, vjp)


# -- convolution ---------------------------------------------------------------------


def _wide(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float64, copy=False)


def _windows(padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N, C, H', W', kh, kw) view of every kernel window."""
    view = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def _scatter_windows(
    cols: np.ndarray, shape: tuple[int, ...], stride: int
) -> np.ndarray:
    """Adjoint of ``_windows``: sum window contributions back onto the grid."""
    _, _, ho, wo, kh, kw = cols.shape
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[
                :, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride
            ] += cols[:, :, :, :, i, j]
    return out


def _check_conv_args(x: Tensor, w: Tensor, stride: int, pad: int, op: str) -> None:
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"{op}: expected 4D input and kernel, got {x.shape} and {w.shape}")
    kh, kw = w.shape[2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"{op}: kernel must be odd-sized, got {kh}x{kw}")
    if pad < 0 or stride < 1:
        raise ValueError(f"{op}: need pad >= 0 and stride >= 1, got pad={pad} stride={stride}")


def conv2d(
    x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0
) -> Tensor:
    """2D cross-correlation. x: (N, Cin, H, W), w: (Cout, Cin, kh, kw), b: (Cout,)."""
    _check_conv_args(x, w, stride, pad, "conv2d")
    n, cin, H, W = x.shape
    cout, wcin, kh, kw = w.shape
    if cin != wcin:
        raise ValueError(
            f"conv2d: input has {cin} channels but kernel {w.shape} expects {wcin}"
        )
    if H + 2 * pad < kh or W + 2 * pad < kw:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input {x.shape}")
    if b is not None and b.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {b.shape} does not match {cout} output channels")

    padded = np.pad(_wide(x.data), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    wd = _wide(w.data)
    cols = _windows(padded, kh, kw, stride)
    out = np.tensordot(cols, wd, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + _wide(b.data)[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=x.dtype)
    bias_dtype = x.dtype if b is None else b.dtype

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        gx = gw = gb = None
        g = _wide(g)
        if needs[0]:
            gcols = np.tensordot(g, wd, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
            gpad = _scatter_windows(gcols, padded.shape, stride)
            gx = gpad[:, :, pad : pad + H, pad : pad + W].astype(x.dtype)
        if needs[1]:
            gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3])).astype(w.dtype)
        if len(needs) > 2 and needs[2]:
            gb = g.sum(axis=(0, 2, 3)).astype(bias_dtype)
        return [gx, gw, gb][: len(needs)]

    inputs = (x, w) if b is None else (x, w, b)
    return record("conv2d", inputs, out, vjp)


def conv_transpose2d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    pad: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed convolution. x: (N, Cin, H, W), w: (Cin, Cout, kh, kw).

    Output size is (H - 1) * stride - 2 * pad + kh + output_padding, the
    spatial inverse of ``conv2d`` with the same stride and padding.
    """
    _check_conv_args(x, w, stride, pad, "conv_transpose2d")
    n, cin, H, W = x.shape
    wcin, cout, kh, kw = w.shape
    if cin != wcin:
        raise ValueError(
            f"conv_transpose2d: input has {cin} channels but kernel {w.shape} expects {wcin}"
        )
    if not 0 <= output_padding < stride:
        raise ValueError(f"output_padding must be in [0, stride), got {output_padding}")
    full_h = (H - 1) * stride + kh + output_padding
    full_w = (W - 1) * stride + kw + output_padding
    out_h, out_w = full_h - 2 * pad, full_w - 2 * pad
    if out_h < 1 or out_w < 1:
        raise ValueError(f"conv_transpose2d: padding {pad} leaves no output for {x.shape}")
    if b is not None and b.shape != (cout,):
        raise ValueError(
            f"conv_transpose2d: bias shape {b.shape} does not match {cout} output channels"
        )

    xd, wd = _wide(x.data), _wide(w.data)
    cols = np.tensordot(xd, wd, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
    full = _scatter_windows(cols, (n, cout, full_h, full_w), stride)
    out = full[:, :, pad : pad + out_h, pad : pad + out_w]
    if b is not None:
        out = out + _wide(b.data)[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=x.dtype)
    bias_dtype = x.dtype if b is None else b.dtype

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        g = _wide(g)
        gfull = np.zeros((n, cout, full_h, full_w), dtype=np.float64)
        gfull[:, :, pad : pad + out_h, pad : pad + out_w] = g
        gcols = _windows(gfull, kh, kw, stride)[:, :, :H, :W]
        gx = gw = gb = None
        if needs[0]:
            gx = np.tensordot(gcols, wd, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
            gx = gx.astype(x.dtype)
        if needs[1]:
            gw = np.tensordot(xd, gcols, axes=([0, 2, 3], [0, 2, 3])).astype(w.dtype)
        if len(needs) > 2 and needs[2]:
            gb = g.sum(axis=(0, 2, 3)).astype(bias_dtype)
        return [gx, gw, gb][: len(needs)]

    inputs = (x, w) if b is None else (x, w, b)
    return record("conv_transpose2d", inputs, out, vjp)


def pool2d(x: Tensor, mode: PoolMode, k: int, stride: int) -> Tensor:
    """Average or max pooling. Max ties route the gradient to the first index, row-major."""
    if x.ndim != 4:
        raise ValueError(f"pool2d: expected a 4D tensor, got {x.shape}")
    n, c, H, W = x.shape
    if k > H or k > W:
        raise ValueError(f"pool2d: window {k} larger than input {H}x{W}")
    if stride < 1:
        raise ValueError(f"pool2d: stride must be >= 1, got {stride}")
    win = _windows(x.data, k, k, stride)
    ho, wo = win.shape[2:4]

    if mode == "avg":
        out = win.mean(axis=(4, 5), dtype=np.float64).astype(x.dtype)

        def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
            cols = np.broadcast_to((g / (k * k))[..., None, None], (n, c, ho, wo, k, k))
            return [_scatter_windows(cols, x.shape, stride)]

    elif mode == "max":
        flat = win.reshape(n, c, ho, wo, k * k)
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

        def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
            cols = np.zeros((n, c, ho, wo, k * k), dtype=g.dtype)
            np.put_along_axis(cols, argmax[..., None], g[..., None], axis=-1)
            return [_scatter_windows(cols.reshape(n, c, ho, wo, k, k), x.shape, stride)]

    else:
        raise ValueError(f"unknown pooling mode {mode!r}")
    return record(f"{mode}_pool2d", (x,), np.ascontiguousarray(out), vjp)


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map x @ w + b. x: (N, D), w: (D, M), b: (M,)."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense: cannot multiply {x.shape} by {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ValueError(f"dense: bias shape {b.shape} does not match {w.shape[1]} outputs")
    xd, wd = _wide(x.data), _wide(w.data)
    out = xd @ wd
    if b is not None:
        out = out + _wide(b.data)
    bias_dtype = x.dtype if b is None else b.dtype

    def vjp(g: np.ndarray, needs: tuple[bool, ...]) -> list[np.ndarray | None]:
        g = _wide(g)
        grads: list[np.ndarray | None] = [
            (g @ wd.T).astype(x.dtype) if needs[0] else None,
            (xd.T @ g).astype(w.dtype) if needs[1] else None,
        ]
        if len(needs) > 2:
            grads.append(g.sum(axis=0).astype(bias_dtype) if needs[2] else None)
        return grads

    inputs = (x, w) if b is None else (x, w, b)
    return record("dense", inputs, out.astype(x.dtype), vjp)
