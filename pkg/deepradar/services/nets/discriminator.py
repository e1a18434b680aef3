"""
Adversarial discriminator D(Y). It sees only the radar grid, not the scene.
"""
import logging

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.models.architecture import ArchitectureConfig
from deepradar.services.nets.layers import ConvStack, Dense, Module

logger = logging.getLogger(__name__)


class Discriminator(Module):
    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.convs = self.add_module("convs", ConvStack(
            1, arch.discriminator_channels, arch.kernel_size, arch.stride, arch.padding, rng))
        factor = arch.stride ** len(arch.discriminator_channels)
        flat = (arch.n_range // factor) * (arch.n_azimuth // factor) * arch.discriminator_channels[-1]
        self.out = self.add_module("out", Dense(flat, 1, rng))

    def __call__(self, y) -> Tensor:
        """Probability that each grid in the batch is real, N x 1."""
        y = y if isinstance(y, Tensor) else Tensor(y)
        return ops.sigmoid(self.out(ops.flatten(self.convs(y))))
