"""
Minimal dense-tensor engine with reverse-mode automatic differentiation.
"""
from deepradar.autodiff.conv import conv2d, conv_transpose2d
from deepradar.autodiff.optim import Adadelta, AdadeltaState, adadelta_step
from deepradar.autodiff.ops import dense, elementwise_map, relu
from deepradar.autodiff.tensor import Tape, Tensor, backward, default_dtype, precision
