"""
Grid decoder shared by the direct heads and the VAE generator.
"""
import logging

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.models.architecture import ArchitectureConfig
from deepradar.services.nets.layers import ConvTranspose2d, Dense, Module

logger = logging.getLogger(__name__)


class GridDecoder(Module):
    """
    Dense layers to a coarse seed grid, then stride-2 transposed
    convolutions up to n_range x n_azimuth x out_channels. The last layer is
    linear; callers apply their own output activation.
    """

    def __init__(self, arch: ArchitectureConfig, in_features: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.arch = arch
        seed_r, seed_a = arch.seed_extent
        channels = list(arch.decoder_channels)
        self.seed_shape = (seed_r, seed_a, channels[0])
        self.hidden = self.add_module("hidden", Dense(in_features, arch.decoder_hidden, rng))
        self.seed = self.add_module("seed", Dense(arch.decoder_hidden, seed_r * seed_a * channels[0], rng))
        self.layers = []
        for idx, (cin, cout) in enumerate(zip(channels, channels[1:] + [out_channels])):
            layer = ConvTranspose2d(cin, cout, arch.kernel_size, arch.stride, arch.padding, rng)
            self.layers.append(self.add_module(f"deconv.{idx}", layer))

    def __call__(self, features: Tensor) -> Tensor:
        h = ops.relu(self.hidden(features))
        h = ops.relu(self.seed(h))
        h = ops.reshape(h, (features.shape[0],) + self.seed_shape)
        for idx, layer in enumerate(self.layers):
            h = layer(h)
            if idx < len(self.layers) - 1:
                h = ops.relu(h)
        return h
