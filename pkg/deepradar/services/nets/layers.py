"""
Parameterized layers on top of the autodiff engine.
"""
import logging
from typing import Dict, Iterator, Tuple

import numpy as np

from deepradar.autodiff import ops
from deepradar.autodiff.conv import conv2d, conv_transpose2d
from deepradar.autodiff.tensor import Tensor

logger = logging.getLogger(__name__)


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """Zero-mean Gaussian with std sqrt(2 / fan_in)."""
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Module:
    """
    Container of named parameters and child modules.

    Parameter names are dotted paths (``encoder.raster.0.weight``) and
    iterate in registration order, which fixes checkpoint layout.
    """

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}

    def add_parameter(self, name: str, data: np.ndarray) -> Tensor:
        tensor = Tensor(data, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield f"{prefix}{name}", tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        return dict(self.named_parameters(prefix))

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int, padding: int,
                 rng: np.random.Generator):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = kernel_size * kernel_size * in_channels
        self.weight = self.add_parameter(
            "weight", he_normal(rng, (kernel_size, kernel_size, in_channels, out_channels), fan_in))
        self.bias = self.add_parameter("bias", np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int, padding: int,
                 rng: np.random.Generator):
        super().__init__()
        self.stride = stride
        self.padding = padding
        # Each output cell receives (k / stride)^2 taps per input channel
        fan_in = max(1, (kernel_size * kernel_size * in_channels) // (stride * stride))
        self.weight = self.add_parameter(
            "weight", he_normal(rng, (kernel_size, kernel_size, in_channels, out_channels), fan_in))
        self.bias = self.add_parameter("bias", np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv_transpose2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.weight = self.add_parameter("weight", he_normal(rng, (out_features, in_features), in_features))
        self.bias = self.add_parameter("bias", np.zeros(out_features))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.weight, self.bias)


class ConvStack(Module):
    """Stride-2 convolutions with ReLU, halving the grid per layer."""

    def __init__(self, in_channels: int, channels, kernel_size: int, stride: int, padding: int,
                 rng: np.random.Generator):
        super().__init__()
        self.layers = []
        for idx, out_channels in enumerate(channels):
            layer = Conv2d(in_channels, out_channels, kernel_size, stride, padding, rng)
            self.layers.append(self.add_module(str(idx), layer))
            in_channels = out_channels

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = ops.relu(layer(x))
        return x
