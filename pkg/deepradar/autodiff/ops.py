"""
Differentiable tensor operations.

Binary ops require equal shapes; the only implicit broadcasting is a
single-element tensor against any tensor.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from deepradar.autodiff.tensor import Tensor, record
from deepradar.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

UNARY_OPS = ("exp", "log", "square", "sigmoid", "relu")
BINARY_OPS = ("add", "sub", "mul")


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _check_binary(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _unbroadcast(grad: np.ndarray, target: Tensor) -> np.ndarray:
    if grad.shape == target.shape:
        return grad
    # target is the single-element side
    return np.asarray(grad.sum()).reshape(target.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("add", a, b)
    return record("add", (a, b), a.data + b.data,
                  lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("sub", a, b)
    return record("sub", (a, b), a.data - b.data,
                  lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("mul", a, b)
    return record("mul", (a, b), a.data * b.data,
                  lambda g: (_unbroadcast(g * b.data, a), _unbroadcast(g * a.data, b)))


def scale(x: Tensor, factor: float) -> Tensor:
    return record("scale", (x,), x.data * factor, lambda g: (g * factor,))


def shift(x: Tensor, offset: float) -> Tensor:
    return record("shift", (x,), x.data + offset, lambda g: (g,))


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return record("exp", (x,), out, lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise DomainError(f"log of non-positive value (min {float(x.data.min()):.3g}) in tensor '{x.name}'")
    return record("log", (x,), np.log(x.data), lambda g: (g / x.data,))


def square(x: Tensor) -> Tensor:
    return record("square", (x,), x.data * x.data, lambda g: (2.0 * g * x.data,))


def sigmoid(x: Tensor) -> Tensor:
    out = special.expit(x.data)
    return record("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is 0."""
    mask = x.data > 0
    return record("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def clip(x: Tensor, low: float, high: float) -> Tensor:
    mask = (x.data >= low) & (x.data <= high)
    return record("clip", (x,), np.clip(x.data, low, high), lambda g: (g * mask,))


def elementwise_map(op: str, *inputs, factor: Optional[float] = None) -> Tensor:
    """
    Apply a named elementwise op.

    Args:
        op: One of add, sub, mul, exp, log, square, sigmoid, relu, scale
        inputs: One tensor for unary ops, two for binary ops
        factor: Constant for ``scale``

    Returns:
        Result tensor
    """
    tensors = [_as_tensor(t) for t in inputs]
    if op == "scale":
        if factor is None or len(tensors) != 1:
            raise ValueError("scale takes one tensor and a factor")
        return scale(tensors[0], factor)
    if op in UNARY_OPS:
        if len(tensors) != 1:
            raise ValueError(f"{op} takes one tensor")
        return globals()[op](tensors[0])
    if op in BINARY_OPS:
        if len(tensors) != 2:
            raise ValueError(f"{op} takes two tensors")
        return globals()[op](*tensors)
    raise ValueError(f"unknown elementwise op '{op}'")


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return record("sum", (x,), np.asarray(x.data.sum()), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    shape = x.shape
    return record("mean", (x,), np.asarray(x.data.mean()),
                  lambda g: (np.broadcast_to(g / n, shape).copy(),))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    return record("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(original),))


def flatten(x: Tensor) -> Tensor:
    """Collapse everything but the leading batch axis."""
    return reshape(x, (x.shape[0], -1))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    arrays = [t.data for t in tensors]
    ndim = arrays[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.data.ndim != ndim:
            raise ShapeError(f"concat: rank {t.data.ndim} differs from {ndim}")
        for d in range(ndim):
            if d != ax and t.shape[d] != tensors[0].shape[d]:
                raise ShapeError(f"concat: dimension {d} is {t.shape[d]}, expected {tensors[0].shape[d]}")
    bounds = np.cumsum([0] + [a.shape[ax] for a in arrays])

    def _backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return record("concat", tuple(tensors), np.concatenate(arrays, axis=ax), _backward)


def take_channels(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``[start, stop)`` along the last axis."""
    if not 0 <= start < stop <= x.shape[-1]:
        raise ShapeError(f"channel slice [{start}, {stop}) outside last dimension {x.shape[-1]}")
    shape = x.shape

    def _backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[..., start:stop] = g
        return (full,)

    return record("take_channels", (x,), x.data[..., start:stop].copy(), _backward)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """
    Fully connected layer ``out = W x + b``.

    Args:
        x: Input of shape [n] or [N x n]
        weights: Weights of shape [m x n]
        bias: Bias of shape [m]

    Returns:
        Output of shape [m] or [N x m]
    """
    if weights.data.ndim != 2:
        raise ShapeError(f"dense: weights must be 2-D, got {weights.shape}")
    m, n = weights.shape
    if x.shape[-1] != n:
        raise ShapeError(f"dense: input dimension {x.shape[-1]} does not match weight columns {n}")
    if bias.shape != (m,):
        raise ShapeError(f"dense: bias dimension {bias.shape} does not match weight rows {m}")
    if x.data.ndim not in (1, 2):
        raise ShapeError(f"dense: input must be 1-D or 2-D, got {x.shape}")

    out = x.data @ weights.data.T + bias.data

    def _backward(g):
        if x.data.ndim == 1:
            return (g @ weights.data, np.outer(g, x.data), g)
        return (g @ weights.data, g.T @ x.data, g.sum(axis=0))

    return record("dense", (x, weights, bias), out, _backward)


def square_normalize(raw: Tensor, floor: float = 1e-12) -> Tensor:
    """
    Mixture weights ``raw**2 / sum(raw**2)`` along the last axis.

    Where the squared sum is below ``floor`` the weights fall back to
    uniform and carry no gradient.
    """
    r = raw.data
    sq = r * r
    total = sq.sum(axis=-1, keepdims=True)
    degenerate = total < floor
    n = r.shape[-1]
    safe_total = np.where(degenerate, 1.0, total)
    weights = np.where(degenerate, 1.0 / n, sq / safe_total)

    def _backward(g):
        inner = (g * weights).sum(axis=-1, keepdims=True)
        grad = 2.0 * r / safe_total * (g - inner)
        return (np.where(degenerate, 0.0, grad),)

    return record("square_normalize", (raw,), weights, _backward)


def weighted_logsumexp(a: Tensor, w: Tensor) -> Tensor:
    """
    ``log(sum_i w_i * exp(a_i))`` along the last axis, keeping the axis.

    Zero weights are allowed; the weights must not all vanish.
    """
    if a.shape != w.shape:
        raise ShapeError(f"weighted_logsumexp: shapes {a.shape} and {w.shape} differ")
    lse = special.logsumexp(a.data, axis=-1, b=w.data, keepdims=True)

    def _backward(g):
        ratio = np.exp(np.minimum(a.data - lse, 80.0))
        return (g * w.data * ratio, g * ratio)

    return record("weighted_logsumexp", (a, w), lse, _backward)


def gaussian_log_density(y: Tensor, mean: Tensor, logvar: Tensor) -> Tensor:
    """Elementwise ``log N(y | mean, exp(logvar))``."""
    diff_sq = square(sub(y, mean))
    precision_term = mul(diff_sq, exp(scale(logvar, -1.0)))
    return scale(shift(add(logvar, precision_term), float(np.log(2.0 * np.pi))), -0.5)


def split_last(x: Tensor, sizes: Sequence[int]) -> Tuple[Tensor, ...]:
    """Split the last axis into consecutive chunks of the given sizes."""
    if int(np.sum(sizes)) != x.shape[-1]:
        raise ShapeError(f"split sizes {list(sizes)} do not add up to last dimension {x.shape[-1]}")
    parts = []
    start = 0
    for size in sizes:
        parts.append(take_channels(x, start, start + size))
        start += size
    return tuple(parts)
