"""
2-D convolution and transposed convolution on NHWC tensors.

Kernels are laid out [k x k x Cin x Cout]. Inputs may omit the batch axis
(H x W x C); outputs then omit it too. conv_transpose2d is the exact linear
adjoint of conv2d's input map.
"""
import logging
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from deepradar.autodiff.tensor import Tensor, record
from deepradar.errors import ShapeError

logger = logging.getLogger(__name__)


def _check(op: str, x: np.ndarray, kernels: Tensor, bias: Tensor, stride: int, padding: int) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{op}: input must be H x W x C or N x H x W x C, got {x.shape}")
    if kernels.data.ndim != 4:
        raise ShapeError(f"{op}: kernels must be k x k x Cin x Cout, got {kernels.shape}")
    k, k2, cin, cout = kernels.shape
    if k != k2 or k < 1:
        raise ShapeError(f"{op}: kernel must be square, got {k} x {k2}")
    if stride < 1:
        raise ShapeError(f"{op}: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"{op}: padding must be >= 0, got {padding}")
    if x.shape[3] != cin:
        raise ShapeError(f"{op}: input channels {x.shape[3]} do not match kernel Cin {cin}")
    if bias.shape != (cout,):
        raise ShapeError(f"{op}: bias dimension {bias.shape} does not match kernel Cout {cout}")


def _windows(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Strided k x k windows, shaped (N, H', W', C, k, k)."""
    return sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]


def _scatter(cols: np.ndarray, out_hw: Tuple[int, int], stride: int) -> np.ndarray:
    """
    Adjoint of ``_windows``: add (N, H', W', k, k, C) window values back
    onto an (N, H, W, C) grid.
    """
    n, hp, wp, k, _, c = cols.shape
    out = np.zeros((n, out_hw[0], out_hw[1], c), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, i:i + stride * hp:stride, j:j + stride * wp:stride, :] += cols[:, :, :, i, j, :]
    return out


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))


def _crop(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return x[:, padding:-padding, padding:-padding, :]


def _batched(x: Tensor) -> Tuple[np.ndarray, bool]:
    if x.data.ndim == 3:
        return x.data[np.newaxis], True
    return x.data, False


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    Cross-correlation with zero padding.

    Output extent is floor((H + 2p - k) / stride) + 1 per spatial axis.

    Args:
        x: Input [H x W x Cin] or [N x H x W x Cin]
        kernels: Kernels [k x k x Cin x Cout]
        bias: Bias [Cout]
        stride: Step between windows
        padding: Zero padding on every spatial border

    Returns:
        Output [H' x W' x Cout] (batched if the input was)
    """
    data, unbatched = _batched(x)
    _check("conv2d", data, kernels, bias, stride, padding)
    k = kernels.shape[0]
    xp = _pad(data, padding)
    for axis, name in ((1, "height"), (2, "width")):
        if xp.shape[axis] < k:
            raise ShapeError(f"conv2d: padded {name} {xp.shape[axis]} is smaller than kernel {k}")

    win = _windows(xp, k, stride)
    out = np.tensordot(win, kernels.data, axes=([3, 4, 5], [2, 0, 1])) + bias.data
    padded_hw = xp.shape[1:3]

    def _backward(g):
        g4 = g[np.newaxis] if unbatched else g
        d_kernels = np.tensordot(win, g4, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        d_bias = g4.sum(axis=(0, 1, 2))
        cols = np.tensordot(g4, kernels.data, axes=([3], [3]))
        d_x = _crop(_scatter(cols, padded_hw, stride), padding)
        if unbatched:
            d_x = d_x[0]
        return (d_x, d_kernels, d_bias)

    return record("conv2d", (x, kernels, bias), out[0] if unbatched else out, _backward)


def conv_transpose2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    Transposed convolution (fractionally strided convolution).

    Output extent is (H - 1) * stride - 2 * padding + k per spatial axis.
    With kernels W' = W.transpose(0, 1, 3, 2) and zero bias this is the
    adjoint of ``conv2d(., W)``.

    Args:
        x: Input [H x W x Cin] or [N x H x W x Cin]
        kernels: Kernels [k x k x Cin x Cout]
        bias: Bias [Cout]
        stride: Upsampling factor
        padding: Cropped from every spatial border of the full output

    Returns:
        Output [H' x W' x Cout] (batched if the input was)
    """
    data, unbatched = _batched(x)
    _check("conv_transpose2d", data, kernels, bias, stride, padding)
    k = kernels.shape[0]
    n, h, w, _ = data.shape
    full_hw = ((h - 1) * stride + k, (w - 1) * stride + k)
    for extent, name in ((full_hw[0], "height"), (full_hw[1], "width")):
        if extent - 2 * padding < 1:
            raise ShapeError(f"conv_transpose2d: output {name} {extent - 2 * padding} is not positive")

    # (N, H, W, Cin) x (k, k, Cin, Cout) -> (N, H, W, k, k, Cout)
    cols = np.tensordot(data, kernels.data, axes=([3], [2]))
    out = _crop(_scatter(cols, full_hw, stride), padding) + bias.data

    def _backward(g):
        g4 = g[np.newaxis] if unbatched else g
        g_full = _pad(g4, padding)
        win = _windows(g_full, k, stride)
        d_x = np.tensordot(win, kernels.data, axes=([3, 4, 5], [3, 0, 1]))
        d_kernels = np.tensordot(data, win, axes=([0, 1, 2], [0, 1, 2])).transpose(2, 3, 0, 1)
        d_bias = g4.sum(axis=(0, 1, 2))
        if unbatched:
            d_x = d_x[0]
        return (d_x, d_kernels, d_bias)

    return record("conv_transpose2d", (x, kernels, bias), out[0] if unbatched else out, _backward)
