"""Layer descriptors and the output-shape law shared by builders and tracing.

Every spatial layer obeys ``out = floor((n + 2*padding - k) / stride) + 1``.
Shapes are (channels, height, width) before flattening and (features,) after.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..errors import ShapeUnderflow


def out_extent(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def out_shape(self, shape):
        c, h, w = shape
        oh = out_extent(h, self.kernel, self.stride, self.padding)
        ow = out_extent(w, self.kernel, self.stride, self.padding)
        if oh < 1 or ow < 1:
            raise ShapeUnderflow(
                f"{self} collapses {h}x{w} input to {oh}x{ow}")
        return (self.filters, oh, ow)


@dataclass(frozen=True)
class Pool:
    kind: str  # "max" | "avg"
    size: int
    stride: int
    padding: int = 0

    def out_shape(self, shape):
        c, h, w = shape
        oh = out_extent(h, self.size, self.stride, self.padding)
        ow = out_extent(w, self.size, self.stride, self.padding)
        if oh < 1 or ow < 1:
            raise ShapeUnderflow(
                f"{self} collapses {h}x{w} input to {oh}x{ow}")
        return (c, oh, ow)


@dataclass(frozen=True)
class BatchNorm:
    def out_shape(self, shape):
        return shape


@dataclass(frozen=True)
class Activation:
    kind: str  # "tanh" | "relu"

    def out_shape(self, shape):
        return shape


@dataclass(frozen=True)
class Flatten:
    def out_shape(self, shape):
        n = 1
        for d in shape:
            n *= d
        return (n,)


@dataclass(frozen=True)
class Dense:
    units: int

    def out_shape(self, shape):
        return (self.units,)


@dataclass(frozen=True)
class Dropout:
    rate: float | None = None  # None: rate is sweep-controlled

    def out_shape(self, shape):
        return shape


@dataclass(frozen=True)
class Softmax:
    def out_shape(self, shape):
        return shape


LayerSpec = Union[Conv, Pool, BatchNorm, Activation, Flatten, Dense, Dropout, Softmax]
