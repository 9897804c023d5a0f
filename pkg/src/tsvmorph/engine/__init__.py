from . import specs
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_layer, max_relative_error, numerical_gradient
from .layers import (
    ActivationLayer,
    BatchNorm2D,
    Conv2D,
    DenseLayer,
    DropoutLayer,
    FlattenLayer,
    Pool2D,
    SoftmaxLayer,
    activation,
    cross_entropy,
    softmax,
)
from .model import SGD, Model, sgd_step

__all__ = [
    "specs", "Model", "SGD", "sgd_step",
    "Conv2D", "Pool2D", "BatchNorm2D", "ActivationLayer", "FlattenLayer",
    "DenseLayer", "DropoutLayer", "SoftmaxLayer",
    "softmax", "activation", "cross_entropy",
    "save_checkpoint", "load_checkpoint",
    "check_layer", "numerical_gradient", "max_relative_error",
]
