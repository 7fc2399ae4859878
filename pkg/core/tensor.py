"""Dense-array kernel: linear algebra, convolution, pooling and single-layer adjoints.

Tensors are plain ``numpy.ndarray`` values in row-major order. Layer code runs in
float32 by default; the verification oracles run the same functions in float64.
"""

import logging
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError, NumericError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32
ORACLE_DTYPE = np.float64

Activation = Literal["relu", "linear"]
LayerKind = Literal["dense", "conv"]


@dataclass(frozen=True)
class PoolRecord:
    """Winning input coordinates of a max-pooling pass.

    ``rows`` and ``cols`` have the pooled output shape (C, H', W') and index
    into the pooled input.
    """

    rows: np.ndarray
    cols: np.ndarray
    input_shape: Tuple[int, int, int]
    window: int
    stride: int


@dataclass(frozen=True)
class LayerRecord:
    """Forward record of one trainable layer.

    ``x`` is the layer input as used by the weights (for dense layers the
    flattened input with the constant 1 appended), ``a`` the pre-activation,
    ``z`` the activation and ``pooled`` the layer output after the optional
    pooling stage.
    """

    kind: LayerKind
    x: np.ndarray
    a: np.ndarray
    z: np.ndarray
    pooled: np.ndarray
    activation: Activation
    weight_shape: Tuple[int, ...]
    input_shape: Tuple[int, ...]
    stride: int = 1
    pad: int = 0
    pool_record: Optional[PoolRecord] = None


class LayerGrad(NamedTuple):
    """Weight and bias gradients of one layer (bias is None for dense layers)"""

    weight: np.ndarray
    bias: Optional[np.ndarray]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of an m×k and a k×n array.

    Raises:
        DimensionError: If the operands are not 2-D or inner extents differ
    """
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def conv_output_extent(size: int, kernel: int, stride: int, pad: int) -> int:
    """Output extent of a convolution along one axis.

    Raises:
        DimensionError: If the kernel does not tile the padded input exactly
    """
    span = size + 2 * pad - kernel
    if stride < 1 or span < 0 or span % stride:
        raise DimensionError(
            f"non-integral output extent: size={size} kernel={kernel} "
            f"stride={stride} pad={pad}"
        )
    return span // stride + 1


def _padded_windows(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]


def conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlate a Cin×H×W input with a Cout×Cin×kh×kw kernel.

    The bias is added by the caller.
    """
    if x.ndim != 3 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 3-D input and 4-D kernel, got {x.shape}, {weight.shape}")
    if weight.shape[1] != x.shape[0]:
        raise DimensionError(
            f"conv2d channel mismatch: input has {x.shape[0]}, kernel expects {weight.shape[1]}"
        )
    _, kh, kw = weight.shape[1:]
    conv_output_extent(x.shape[1], kh, stride, pad)
    conv_output_extent(x.shape[2], kw, stride, pad)
    windows = _padded_windows(x, kh, kw, stride, pad)
    # (C, H', W', kh, kw) · (O, C, kh, kw) -> (H', W', O)
    out = np.tensordot(windows, weight, axes=([0, 3, 4], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(2, 0, 1))


def conv2d_weight_adjoint(
    x: np.ndarray, delta: np.ndarray, kernel_hw: Tuple[int, int], stride: int, pad: int
) -> np.ndarray:
    """Kernel gradient of ⟨delta, conv2d(x, W)⟩, accumulated over shared positions"""
    kh, kw = kernel_hw
    windows = _padded_windows(x, kh, kw, stride, pad)
    if windows.shape[1:3] != delta.shape[1:]:
        raise DimensionError(f"delta {delta.shape} does not match conv output grid {windows.shape[1:3]}")
    return np.tensordot(delta, windows, axes=([1, 2], [1, 2]))


def conv2d_input_adjoint(
    delta: np.ndarray,
    weight: np.ndarray,
    input_shape: Tuple[int, ...],
    stride: int,
    pad: int,
) -> np.ndarray:
    """Input gradient of ⟨delta, conv2d(x, W)⟩"""
    channels, height, width = input_shape
    _, _, kh, kw = weight.shape
    out_h, out_w = delta.shape[1:]
    grad = np.zeros((channels, height + 2 * pad, width + 2 * pad), dtype=delta.dtype)
    for i in range(kh):
        rows = slice(i, i + stride * (out_h - 1) + 1, stride)
        for j in range(kw):
            cols = slice(j, j + stride * (out_w - 1) + 1, stride)
            grad[:, rows, cols] += np.tensordot(weight[:, :, i, j], delta, axes=([0], [0]))
    if pad:
        grad = grad[:, pad:-pad, pad:-pad]
    return np.ascontiguousarray(grad)


def maxpool2d(x: np.ndarray, window: int, stride: int) -> Tuple[np.ndarray, PoolRecord]:
    """Per-window maximum over a C×H×W map.

    Ties go to the first cell of the window in row-major order.
    """
    if x.ndim != 3:
        raise DimensionError(f"maxpool2d expects a 3-D map, got {x.shape}")
    channels, height, width = x.shape
    if window < 1 or stride < 1 or window > height or window > width:
        raise DimensionError(f"pool window {window} does not fit input {x.shape}")
    windows = sliding_window_view(x, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    out_h, out_w = windows.shape[1:3]
    flat = windows.reshape(channels, out_h, out_w, window * window)
    winner = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]
    rows = np.arange(out_h)[None, :, None] * stride + winner // window
    cols = np.arange(out_w)[None, None, :] * stride + winner % window
    record = PoolRecord(
        rows=rows,
        cols=cols,
        input_shape=(channels, height, width),
        window=window,
        stride=stride,
    )
    return np.ascontiguousarray(out), record


def maxpool2d_adjoint(upstream: np.ndarray, record: PoolRecord) -> np.ndarray:
    """Route a pooled-output gradient back to the winning input cells"""
    if upstream.shape != record.rows.shape:
        raise DimensionError(f"upstream {upstream.shape} does not match pooled shape {record.rows.shape}")
    grad = np.zeros(record.input_shape, dtype=upstream.dtype)
    channel = np.broadcast_to(np.arange(record.input_shape[0])[:, None, None], upstream.shape)
    np.add.at(grad, (channel, record.rows, record.cols), upstream)
    return grad


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0).astype(a.dtype, copy=False)


def relu_prime(a: np.ndarray) -> np.ndarray:
    """1 where a > 0, else 0 (the derivative at 0 is taken as 0)"""
    return (a > 0).astype(a.dtype)


def activate(a: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == "relu":
        return relu(a)
    return a.copy()


def activation_prime(a: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == "relu":
        return relu_prime(a)
    return np.ones_like(a)


def _pre_activation_delta(upstream: np.ndarray, record: LayerRecord) -> np.ndarray:
    if upstream.shape != record.pooled.shape:
        raise DimensionError(
            f"upstream {upstream.shape} does not match layer output {record.pooled.shape}"
        )
    if record.pool_record is not None:
        upstream = maxpool2d_adjoint(upstream, record.pool_record)
    return upstream * activation_prime(record.a, record.activation)


def layer_adjoint(upstream: np.ndarray, record: LayerRecord) -> LayerGrad:
    """Weight gradients of ⟨upstream, layer output⟩ for one trainable layer.

    For a dense layer this is upstream_j · ρ'(a_j) · x_i. For a conv layer the
    upstream is first routed through the pooling record, then accumulated over
    all positions sharing a kernel weight.
    """
    delta = _pre_activation_delta(upstream, record)
    if record.kind == "dense":
        return LayerGrad(np.outer(delta, record.x), None)
    kernel_hw = (record.weight_shape[2], record.weight_shape[3])
    weight = conv2d_weight_adjoint(record.x, delta, kernel_hw, record.stride, record.pad)
    return LayerGrad(weight, delta.sum(axis=(1, 2)))


def layer_input_adjoint(
    upstream: np.ndarray, record: LayerRecord, weight: np.ndarray
) -> np.ndarray:
    """Gradient of ⟨upstream, layer output⟩ with respect to the layer input"""
    if weight.shape != record.weight_shape:
        raise DimensionError(f"weight {weight.shape} does not match record {record.weight_shape}")
    delta = _pre_activation_delta(upstream, record)
    if record.kind == "dense":
        return (weight[:, :-1].T @ delta).reshape(record.input_shape)
    return conv2d_input_adjoint(delta, weight, record.input_shape, record.stride, record.pad)


def ensure_finite(value: np.ndarray, what: str) -> np.ndarray:
    finite = np.isfinite(value)
    if not np.all(finite):
        logger.error(f"{int(finite.size - finite.sum())} non-finite values in {what}")
        raise NumericError(f"non-finite values in {what}")
    return value
