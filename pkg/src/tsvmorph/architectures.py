"""The four classification networks, their shape traces, and parameter counts.

All four take a 54x54x1 grayscale input and end in Dense(3) -> Softmax, one
output per morphology class. Dropout slots carry no fixed rate; the training
configuration fills them in.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from io import StringIO

from .engine.specs import (
    Activation,
    BatchNorm,
    Conv,
    Dense,
    Dropout,
    Flatten,
    LayerSpec,
    Pool,
    Softmax,
)

INPUT_SHAPE = (1, 54, 54)


class ArchitectureId(Enum):
    LENET5 = "lenet5"
    ALEXNET_INSPIRED_LENET = "alexnet_inspired_lenet"
    ALEXNET = "alexnet"
    VGG_INSPIRED_ALEXNET = "vgg_inspired_alexnet"


@dataclass(frozen=True)
class ArchitectureSpec:
    id: ArchitectureId
    layers: tuple[LayerSpec, ...]

    @property
    def dropout_slots(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.layers) if isinstance(s, Dropout))

    @property
    def has_dropout(self) -> bool:
        return bool(self.dropout_slots)


def _lenet5():
    return (
        Conv(6, 5), Activation("tanh"), Pool("avg", 2, 2),
        Conv(16, 5), Activation("tanh"), Pool("avg", 2, 2),
        Conv(120, 5), Activation("tanh"),
        Flatten(),
        Dense(84), Activation("tanh"),
        Dense(3), Softmax(),
    )


def _alexnet_inspired_lenet():
    return (
        Conv(6, 5), BatchNorm(), Activation("relu"), Pool("max", 2, 2),
        Conv(16, 5), BatchNorm(), Activation("relu"), Pool("max", 2, 2),
        Conv(120, 5), BatchNorm(), Activation("relu"), Pool("max", 2, 2),
        Flatten(),
        Dense(512), Activation("relu"), Dropout(),
        Dense(64), Activation("relu"), Dropout(),
        Dense(3), Softmax(),
    )


def _alexnet():
    return (
        Conv(96, 11, stride=4), BatchNorm(), Activation("relu"), Pool("max", 3, 2),
        Conv(256, 5, padding=2), BatchNorm(), Activation("relu"), Pool("max", 3, 2, padding=1),
        Conv(384, 3, padding=1), Activation("relu"),
        Conv(384, 3, padding=1), Activation("relu"),
        Conv(256, 3, padding=1), Activation("relu"), Pool("max", 3, 2, padding=1),
        Flatten(),
        Dense(1024), Activation("relu"), Dropout(),
        Dense(1024), Activation("relu"), Dropout(),
        Dense(3), Softmax(),
    )


def _vgg_inspired_alexnet():
    # reaches 256 feature maps of size 3x3 before the FC stack, with no padding anywhere
    return (
        Conv(96, 3), BatchNorm(), Activation("relu"), Pool("max", 2, 2),
        Conv(256, 3), BatchNorm(), Activation("relu"), Pool("max", 2, 2),
        Conv(384, 3), Activation("relu"),
        Conv(384, 3), Activation("relu"),
        Conv(256, 3), Activation("relu"), Pool("max", 2, 2),
        Flatten(),
        Dense(1024), Activation("relu"), Dropout(),
        Dense(256), Activation("relu"), Dropout(),
        Dense(64), Activation("relu"),
        Dense(3), Softmax(),
    )


_BUILDERS = {
    ArchitectureId.LENET5: _lenet5,
    ArchitectureId.ALEXNET_INSPIRED_LENET: _alexnet_inspired_lenet,
    ArchitectureId.ALEXNET: _alexnet,
    ArchitectureId.VGG_INSPIRED_ALEXNET: _vgg_inspired_alexnet,
}


def build(arch: ArchitectureId | str) -> ArchitectureSpec:
    if isinstance(arch, str):
        arch = ArchitectureId(arch)
    return ArchitectureSpec(id=arch, layers=_BUILDERS[arch]())


def shape_trace(spec: ArchitectureSpec, input_shape=INPUT_SHAPE):
    """(layer, output shape) for every layer; raises ShapeUnderflow on collapse."""
    shape = tuple(input_shape)
    trace = []
    for layer in spec.layers:
        shape = layer.out_shape(shape)
        trace.append((layer, shape))
    return trace


def preflatten_shape(spec: ArchitectureSpec, input_shape=INPUT_SHAPE):
    shape = tuple(input_shape)
    for layer in spec.layers:
        if isinstance(layer, Flatten):
            return shape
        shape = layer.out_shape(shape)
    return shape


def layer_param_count(layer: LayerSpec, in_shape) -> int:
    if isinstance(layer, Conv):
        return layer.filters * (in_shape[0] * layer.kernel ** 2 + 1)
    if isinstance(layer, BatchNorm):
        return 2 * in_shape[0]  # gamma and beta
    if isinstance(layer, Dense):
        return in_shape[0] * layer.units + layer.units
    return 0


def parameter_count(spec: ArchitectureSpec, input_shape=INPUT_SHAPE) -> int:
    shape = tuple(input_shape)
    total = 0
    for layer in spec.layers:
        total += layer_param_count(layer, shape)
        shape = layer.out_shape(shape)
    return total


def _layer_label(layer: LayerSpec) -> str:
    if isinstance(layer, Conv):
        return f"conv {layer.filters}x{layer.kernel}x{layer.kernel} s{layer.stride} p{layer.padding}"
    if isinstance(layer, Pool):
        return f"{layer.kind}pool {layer.size}x{layer.size} s{layer.stride} p{layer.padding}"
    if isinstance(layer, BatchNorm):
        return "batchnorm"
    if isinstance(layer, Activation):
        return layer.kind
    if isinstance(layer, Flatten):
        return "flatten"
    if isinstance(layer, Dense):
        return f"dense {layer.units}"
    if isinstance(layer, Dropout):
        return "dropout" if layer.rate is None else f"dropout {layer.rate}"
    return "softmax"


def describe(arch: ArchitectureId | str, input_shape=INPUT_SHAPE) -> str:
    """Stable text rendering of the layer table, shape trace, and param count."""
    spec = build(arch)
    out = StringIO()
    out.write(f"architecture: {spec.id.value}\n")
    out.write(f"input: {input_shape[0]}x{input_shape[1]}x{input_shape[2]}\n")
    shape = tuple(input_shape)
    total = 0
    for i, layer in enumerate(spec.layers):
        n = layer_param_count(layer, shape)
        total += n
        shape = layer.out_shape(shape)
        shape_str = "x".join(str(d) for d in shape)
        out.write(f"{i:3d}  {_layer_label(layer):<28s} -> {shape_str:<12s} params {n}\n")
    out.write(f"total trainable parameters: {total}\n")
    return out.getvalue()
