"""
Direct (non-latent) output heads: per-cell Normal and per-cell Gaussian mixture.

Both heads decode the conditional input x straight into distribution
parameters over normalized power. Negative log-likelihoods are summed over
every cell of every frame in the batch.
"""
import logging
from typing import NamedTuple, Sequence, Union

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.errors import ShapeError
from deepradar.models.architecture import ArchitectureConfig
from deepradar.services.nets.decoder import GridDecoder
from deepradar.services.nets.layers import Module

logger = logging.getLogger(__name__)

Rngs = Union[np.random.Generator, Sequence[np.random.Generator]]


class NormalGridParams(NamedTuple):
    """Mean and log-variance grids, each N x H x W x 1."""
    mean: Tensor
    logvar: Tensor


class GmmGridParams(NamedTuple):
    """Per-cell mixture weights, means and log-variances, each N x H x W x n."""
    weights: Tensor
    means: Tensor
    logvars: Tensor

    @property
    def n_components(self) -> int:
        return self.weights.shape[-1]


def _as_tensor(y) -> Tensor:
    return y if isinstance(y, Tensor) else Tensor(y)


def _frame_rngs(rngs: Rngs, n: int):
    if isinstance(rngs, np.random.Generator):
        return [rngs] * n
    if len(rngs) != n:
        raise ShapeError(f"{len(rngs)} random generators for a batch of {n} frames")
    return list(rngs)


def _per_frame(rngs: Rngs, shape, draw) -> np.ndarray:
    """Draw per-frame noise of ``shape[1:]`` from each frame's own generator."""
    return np.stack([draw(rng, shape[1:]) for rng in _frame_rngs(rngs, shape[0])])


class NormalHead(Module):
    """x -> (mean, log variance) grids; both layers linear."""

    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.decoder = self.add_module("decoder", GridDecoder(arch, arch.d_x, 2, rng))

    def __call__(self, x: Tensor) -> NormalGridParams:
        out = self.decoder(x)
        mean, logvar = ops.split_last(out, (1, 1))
        return NormalGridParams(mean, logvar)


def normal_nll(params: NormalGridParams, y) -> Tensor:
    """sum over cells of 1/2 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2)."""
    y = _as_tensor(y)
    if y.shape != params.mean.shape:
        raise ShapeError(f"observation {y.shape} does not match predicted grid {params.mean.shape}")
    return ops.scale(ops.sum(ops.gaussian_log_density(y, params.mean, params.logvar)), -1.0)


def normal_sample(params: NormalGridParams, rngs: Rngs) -> np.ndarray:
    """mu + sigma * eta in normalized units (not clamped)."""
    mean = params.mean.data.astype(np.float64)
    sigma = np.exp(0.5 * params.logvar.data.astype(np.float64))
    eta = _per_frame(rngs, mean.shape, lambda rng, shape: rng.standard_normal(shape))
    return mean + sigma * eta


class GmmHead(Module):
    """
    x -> 3n output layers: raw weights (squared and normalized), means
    (linear) and log variances (ReLU plus a small offset).
    """

    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.n = arch.gmm_components
        self.logvar_offset = arch.gmm_logvar_offset
        self.decoder = self.add_module("decoder", GridDecoder(arch, arch.d_x, 3 * self.n, rng))

    def __call__(self, x: Tensor) -> GmmGridParams:
        out = self.decoder(x)
        raw_weights, means, raw_logvars = ops.split_last(out, (self.n, self.n, self.n))
        weights = ops.square_normalize(raw_weights)
        logvars = ops.shift(ops.relu(raw_logvars), self.logvar_offset)
        return GmmGridParams(weights, means, logvars)


def gmm_nll(params: GmmGridParams, y) -> Tensor:
    """-sum over cells of log sum_i w_i N(y | mu_i, sigma_i^2), stabilized by log-sum-exp."""
    y = _as_tensor(y)
    if y.shape[:-1] != params.means.shape[:-1] or y.shape[-1] != 1:
        raise ShapeError(f"observation {y.shape} does not match predicted grid {params.means.shape}")
    n = params.n_components
    y_wide = y if n == 1 else ops.concat([y] * n, axis=-1)
    log_density = ops.gaussian_log_density(y_wide, params.means, params.logvars)
    return ops.scale(ops.sum(ops.weighted_logsumexp(log_density, params.weights)), -1.0)


def gmm_sample(params: GmmGridParams, rngs: Rngs) -> np.ndarray:
    """Pick a component per cell by weight, then draw from it (normalized units)."""
    weights = params.weights.data.astype(np.float64)
    means = params.means.data.astype(np.float64)
    sigmas = np.exp(0.5 * params.logvars.data.astype(np.float64))
    cell_shape = weights.shape[:-1] + (1,)

    def draw(rng, shape):
        return np.concatenate([rng.random(shape), rng.standard_normal(shape)], axis=-1)

    noise = _per_frame(rngs, cell_shape, draw)
    u, eta = noise[..., :1], noise[..., 1:]
    component = (np.cumsum(weights, axis=-1) < u).sum(axis=-1, keepdims=True)
    component = np.minimum(component, weights.shape[-1] - 1)
    mean = np.take_along_axis(means, component, axis=-1)
    sigma = np.take_along_axis(sigmas, component, axis=-1)
    return mean + sigma * eta
