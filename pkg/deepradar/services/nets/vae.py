"""
Conditional VAE parts: recognition network Q(z | x, Y), the
reparameterized draw and the decoder f(x, z).
"""
import logging
from typing import NamedTuple

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.errors import ShapeError
from deepradar.models.architecture import ArchitectureConfig
from deepradar.services.nets.decoder import GridDecoder
from deepradar.services.nets.layers import ConvStack, Dense, Module

logger = logging.getLogger(__name__)


class LatentGaussian(NamedTuple):
    """Diagonal Gaussian over z, each field N x d_z."""
    mean: Tensor
    logvar: Tensor


class RecognitionNet(Module):
    """Convolutions over Y (same shape as the raster head), joined with x, to (mu_z, log sigma_z^2)."""

    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.arch = arch
        self.convs = self.add_module("convs", ConvStack(
            1, arch.raster_channels, arch.kernel_size, arch.stride, arch.padding, rng))
        factor = arch.stride ** len(arch.raster_channels)
        flat = (arch.n_range // factor) * (arch.n_azimuth // factor) * arch.raster_channels[-1]
        self.hidden = self.add_module("hidden", Dense(flat + arch.d_x, arch.recognition_hidden, rng))
        self.out = self.add_module("out", Dense(arch.recognition_hidden, 2 * arch.d_z, rng))

    def __call__(self, x: Tensor, y) -> LatentGaussian:
        y = y if isinstance(y, Tensor) else Tensor(y)
        expected = (self.arch.n_range, self.arch.n_azimuth, 1)
        if y.shape[1:] != expected:
            raise ShapeError(f"observation batch {y.shape} does not match grid {expected}")
        h = ops.flatten(self.convs(y))
        h = ops.relu(self.hidden(ops.concat([h, x], axis=1)))
        mean, logvar = ops.split_last(self.out(h), (self.arch.d_z, self.arch.d_z))
        return LatentGaussian(mean, logvar)


def reparameterize(latent: LatentGaussian, eta: np.ndarray) -> Tensor:
    """z = mu + sigma * eta with eta held fixed, differentiable in (mu, logvar)."""
    eta = np.asarray(eta)
    if eta.shape != latent.mean.shape:
        raise ShapeError(f"noise shape {eta.shape} does not match latent {latent.mean.shape}")
    sigma = ops.exp(ops.scale(latent.logvar, 0.5))
    return ops.add(latent.mean, ops.mul(sigma, Tensor(eta)))


class VaeDecoder(Module):
    """f(x, z): concatenation -> grid decoder -> sigmoid, normalized power in [0, 1]."""

    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.arch = arch
        self.decoder = self.add_module("decoder", GridDecoder(arch, arch.d_x + arch.d_z, 1, rng))

    def __call__(self, x: Tensor, z) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        if z.shape != (x.shape[0], self.arch.d_z):
            raise ShapeError(f"latent batch {z.shape} must be {x.shape[0]} x {self.arch.d_z}")
        return ops.sigmoid(self.decoder(ops.concat([x, z], axis=1)))
