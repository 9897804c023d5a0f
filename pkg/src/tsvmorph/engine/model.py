"""Sequential model assembly, reverse-mode backprop, and SGD with momentum."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import specs
from .layers import (
    ActivationLayer,
    BatchNorm2D,
    Conv2D,
    DenseLayer,
    DropoutLayer,
    FlattenLayer,
    Layer,
    Pool2D,
    SoftmaxLayer,
    cross_entropy,
)


class Model:
    """A sequential network instantiated from layer descriptors."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    @classmethod
    def from_layer_specs(cls, layer_specs, input_shape=(1, 54, 54), dropout=None,
                         dtype=np.float32, seed=0):
        """Instantiate layers, threading the shape law through the stack.

        ``dropout`` fills the rate of any sweep-controlled Dropout slot.
        Weight init follows each layer's downstream activation: Kaiming
        fan-in scaling for relu stacks, Xavier for tanh.
        """
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x1417)))
        init = "xavier" if any(
            isinstance(s, specs.Activation) and s.kind == "tanh" for s in layer_specs
        ) else "he"
        layers: list[Layer] = []
        shape = tuple(input_shape)
        for spec in layer_specs:
            if isinstance(spec, specs.Conv):
                layers.append(Conv2D(shape[0], spec.filters, spec.kernel, spec.stride,
                                     spec.padding, init=init, dtype=dtype, rng=rng))
            elif isinstance(spec, specs.Pool):
                layers.append(Pool2D(spec.kind, spec.size, spec.stride, spec.padding))
            elif isinstance(spec, specs.BatchNorm):
                layers.append(BatchNorm2D(shape[0], dtype=dtype))
            elif isinstance(spec, specs.Activation):
                layers.append(ActivationLayer(spec.kind))
            elif isinstance(spec, specs.Flatten):
                layers.append(FlattenLayer())
            elif isinstance(spec, specs.Dense):
                layers.append(DenseLayer(shape[0], spec.units, init=init, dtype=dtype, rng=rng))
            elif isinstance(spec, specs.Dropout):
                rate = spec.rate if spec.rate is not None else (dropout or 0.0)
                layers.append(DropoutLayer(rate))
            elif isinstance(spec, specs.Softmax):
                layers.append(SoftmaxLayer())
            else:
                raise ShapeMismatch(f"unknown layer spec {spec!r}")
            shape = spec.out_shape(shape)
        return cls(layers)

    def forward(self, x, train=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def loss_and_grads(self, x, onehot, train=True, rng=None):
        """Forward, cross-entropy loss, then full backward. Returns (loss, probs)."""
        probs = self.forward(x, train=train, rng=rng)
        loss, dprobs = cross_entropy(probs, onehot)
        self.backward(dprobs.astype(probs.dtype))
        return loss, probs

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                yield f"layer{i}.{name}", layer, name, arr

    def state_dict(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.state_arrays().items():
                out[f"layer{i}.{name}"] = arr
        return out

    def load_state_dict(self, state):
        for i, layer in enumerate(self.layers):
            for name in layer.state_arrays():
                key = f"layer{i}.{name}"
                arr = state[key]
                target = layer.params.get(name)
                if target is not None:
                    if target.shape != arr.shape:
                        raise ShapeMismatch(f"{key}: {target.shape} vs {arr.shape}")
                    layer.params[name] = arr.astype(target.dtype).reshape(target.shape)
                else:  # batch-norm running stats
                    setattr(layer, name, arr.astype(getattr(layer, name).dtype))


class SGD:
    """v <- momentum * v + g; p <- p - lr * v."""

    def __init__(self, lr=0.01, momentum=0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, model: Model):
        for key, layer, name, param in model.named_params():
            grad = layer.grads.get(name)
            if grad is None:
                continue
            if grad.shape != param.shape:
                raise ShapeMismatch(f"{key}: grad {grad.shape} vs param {param.shape}")
            v = self.velocity.get(key)
            if v is None:
                v = np.zeros_like(param)
            v = self.momentum * v + grad
            self.velocity[key] = v
            layer.params[name] = param - self.lr * v


def sgd_step(model: Model, lr: float, momentum: float, velocity: dict | None = None):
    """One functional update from the gradients currently stored on the model.

    Returns the velocity dict to thread into the next call.
    """
    opt = SGD(lr=lr, momentum=momentum)
    if velocity:
        opt.velocity = velocity
    opt.step(model)
    return opt.velocity
