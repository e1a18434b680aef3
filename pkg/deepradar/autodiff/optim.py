"""
ADADELTA optimizer.
"""
import logging
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from deepradar.autodiff.tensor import Tensor
from deepradar.errors import ShapeError

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.95
DEFAULT_EPSILON = 1e-6


class AdadeltaState:
    """Running averages E[g^2] and E[dx^2] for one parameter."""

    def __init__(self, shape: Tuple[int, ...], rho: float = DEFAULT_RHO, epsilon: float = DEFAULT_EPSILON,
                 dtype=np.float32):
        if not 0.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {rho}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.rho = rho
        self.epsilon = epsilon
        self.sq_grad = np.zeros(shape, dtype=dtype)
        self.sq_update = np.zeros(shape, dtype=dtype)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.sq_grad.shape


def adadelta_step(param: Tensor, state: AdadeltaState) -> np.ndarray:
    """
    Apply one ADADELTA update to ``param`` in place.

    Args:
        param: Parameter with a populated grad
        state: Accumulators matching the parameter's shape

    Returns:
        The applied update
    """
    if param.grad is None:
        raise ValueError(f"parameter '{param.name}' has no gradient")
    if state.shape != param.shape:
        raise ShapeError(f"optimizer state shape {state.shape} does not match parameter '{param.name}' {param.shape}")

    rho, eps = state.rho, state.epsilon
    g = param.grad
    state.sq_grad *= rho
    state.sq_grad += (1.0 - rho) * g * g
    update = -(np.sqrt(state.sq_update + eps) / np.sqrt(state.sq_grad + eps)) * g
    state.sq_update *= rho
    state.sq_update += (1.0 - rho) * update * update
    param.data += update.astype(param.data.dtype, copy=False)
    return update


class Adadelta:
    """ADADELTA over a named parameter set; one state per parameter."""

    def __init__(self, params: Dict[str, Tensor], rho: float = DEFAULT_RHO, epsilon: float = DEFAULT_EPSILON):
        self.params = params
        self.states = {
            name: AdadeltaState(p.shape, rho=rho, epsilon=epsilon, dtype=p.data.dtype)
            for name, p in params.items()
        }
        self.steps = 0

    def step(self, names: Optional[Iterable[str]] = None) -> Dict[str, np.ndarray]:
        """Update every (or each named) parameter; returns the applied updates by name."""
        updates = {name: adadelta_step(self.params[name], self.states[name])
                   for name in (self.params if names is None else names)}
        self.steps += 1
        return updates
