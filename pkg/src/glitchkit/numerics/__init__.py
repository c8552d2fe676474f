from .nn import batchnorm2d, conv2d, cross_entropy_loss, flatten, linear, maxpool2d, relu, softmax
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, active_tape, backward

__all__ = [
    "AdamState",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "backward",
    "batchnorm2d",
    "conv2d",
    "cross_entropy_loss",
    "flatten",
    "linear",
    "maxpool2d",
    "relu",
    "softmax",
]
