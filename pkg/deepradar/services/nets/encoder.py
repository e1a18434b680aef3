"""
Scene encoder: raster head + object-list head -> conditional input x.
"""
import logging
import math

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.errors import ShapeError
from deepradar.models.architecture import ArchitectureConfig
from deepradar.services.nets.layers import Conv2d, ConvStack, Dense, Module

logger = logging.getLogger(__name__)

# Pose features are scaled to roughly unit range before the 1x1 convolutions:
# x and y by 75 m (default maximum range), heading by pi, speed by 20 m/s
POSE_SCALE = (1.0 / 75.0, 1.0 / 75.0, 1.0 / math.pi, 1.0 / 20.0)


def object_feature_scale(n_features: int) -> np.ndarray:
    scale = np.ones(n_features)
    scale[:len(POSE_SCALE)] = POSE_SCALE[:n_features]
    return scale


class SceneEncoder(Module):
    """
    Two heads: stride-2 convolutions over the terrain raster, and 1x1
    convolutions over the n_objects x 1 x n_features object table (one
    shared filter bank per row). Both are flattened, concatenated and passed
    through two dense ReLU layers.
    """

    def __init__(self, arch: ArchitectureConfig, rng: np.random.Generator):
        super().__init__()
        self.arch = arch
        self.raster_head = self.add_module("raster", ConvStack(
            1, arch.raster_channels, arch.kernel_size, arch.stride, arch.padding, rng))
        self.object_layers = []
        in_channels = arch.n_features
        for idx, out_channels in enumerate(arch.object_channels):
            layer = Conv2d(in_channels, out_channels, 1, 1, 0, rng)
            self.object_layers.append(self.add_module(f"objects.{idx}", layer))
            in_channels = out_channels

        factor = arch.stride ** len(arch.raster_channels)
        raster_flat = (arch.n_range // factor) * (arch.n_azimuth // factor) * arch.raster_channels[-1]
        object_flat = arch.n_objects * arch.object_channels[-1]
        self.hidden = self.add_module("hidden", Dense(raster_flat + object_flat, arch.encoder_hidden, rng))
        self.out = self.add_module("out", Dense(arch.encoder_hidden, arch.d_x, rng))
        self._scale = object_feature_scale(arch.n_features)

    def _check_inputs(self, rasters: np.ndarray, objects: np.ndarray) -> None:
        arch = self.arch
        if rasters.shape[1:] != (arch.n_range, arch.n_azimuth, 1):
            raise ShapeError(f"raster batch {rasters.shape} does not match grid {arch.n_range}x{arch.n_azimuth}x1")
        if objects.shape[1:] != (arch.n_objects, 1, arch.n_features):
            raise ShapeError(f"object batch {objects.shape} does not match {arch.n_objects}x1x{arch.n_features}")
        if rasters.shape[0] != objects.shape[0]:
            raise ShapeError(f"batch dimension differs: {rasters.shape[0]} rasters, {objects.shape[0]} object lists")

    def object_features(self, objects: np.ndarray) -> Tensor:
        """Per-row output of the 1x1 convolution stage, N x n_objects x 1 x C."""
        h = Tensor(np.asarray(objects) * self._scale)
        for layer in self.object_layers:
            h = ops.relu(layer(h))
        return h

    def __call__(self, rasters: np.ndarray, objects: np.ndarray) -> Tensor:
        """
        Encode a batch of scenes.

        Args:
            rasters: N x n_range x n_azimuth x 1 terrain rasters
            objects: N x n_objects x 1 x n_features object lists

        Returns:
            N x d_x conditional input
        """
        rasters = np.asarray(rasters)
        objects = np.asarray(objects)
        self._check_inputs(rasters, objects)
        raster_features = ops.flatten(self.raster_head(Tensor(rasters)))
        object_features = ops.flatten(self.object_features(objects))
        h = ops.concat([raster_features, object_features], axis=1)
        h = ops.relu(self.hidden(h))
        return ops.relu(self.out(h))
