"""
Finite-difference gradient checking.

Run inside ``precision(np.float64)`` so round-off stays well below the
tolerances being checked.
"""
from typing import Callable, Optional, Sequence

import numpy as np

from deepradar.autodiff.tensor import Tape, Tensor, backward


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-3,
                       indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Central differences of the scalar ``fn()`` w.r.t. ``tensor``.

    Args:
        fn: Closure recomputing the scalar loss from current tensor values
        tensor: Tensor whose data is perturbed in place
        h: Step size
        indices: Flat indices to perturb (all when None)

    Returns:
        Array shaped like ``tensor`` (zeros at unchecked indices)
    """
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    for idx in (range(flat.size) if indices is None else indices):
        original = flat[idx]
        flat[idx] = original + h
        plus = fn().item()
        flat[idx] = original - h
        minus = fn().item()
        flat[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad.reshape(tensor.shape)


def analytic_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> list:
    with Tape() as tape:
        loss = fn()
    backward(loss, tape)
    return [t.grad.copy() for t in tensors]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), zero when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor], h: float = 1e-3,
                    sample: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """
    Worst relative error between backprop and central differences over
    ``tensors``. With ``sample`` only that many random coordinates per
    tensor are compared.
    """
    analytic = analytic_gradients(fn, tensors)
    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        indices = None
        if sample is not None and sample < tensor.size:
            rng = rng or np.random.default_rng(0)
            indices = rng.choice(tensor.size, size=sample, replace=False)
        numeric = numerical_gradient(fn, tensor, h=h, indices=indices)
        if indices is not None:
            mask = np.zeros(tensor.size, dtype=bool)
            mask[indices] = True
            grad = np.where(mask.reshape(tensor.shape), grad, 0.0)
        worst = max(worst, relative_error(grad, numeric))
    return worst
