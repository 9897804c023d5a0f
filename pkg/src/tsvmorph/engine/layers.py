"""Forward and backward passes for every layer the four networks need.

Convolutions use cross-correlation semantics (no kernel flip) with zero
padding. Convolution and pooling are driven by im2col-style window views so
the heavy lifting lands in BLAS matmuls; the col2im scatter in the backward
pass loops only over the kernel footprint.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import (
    KernelLargerThanInput,
    NoForwardCache,
    ShapeMismatch,
    SingletonBatchInTrainMode,
    WindowLargerThanInput,
)
from .specs import out_extent

PROB_FLOOR = 1e-12


class Layer:
    """Base class: parameters, gradients, and a forward cache."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def _pop_cache(self):
        if self._cache is None:
            raise NoForwardCache(f"{type(self).__name__}.backward before forward")
        cache, self._cache = self._cache, None
        return cache

    def state_arrays(self):
        """Name -> array pairs persisted in checkpoints (params plus buffers)."""
        return dict(self.params)


def _windows(x_pad, k, stride):
    """View of all kxk windows at the given stride: [N, C, Ho, Wo, k, k]."""
    view = sliding_window_view(x_pad, (k, k), axis=(2, 3))
    return view[:, :, ::stride, ::stride, :, :]


def _col2im(dcols, x_pad_shape, k, stride):
    """Scatter-add window gradients back onto the padded input."""
    n, c, hp, wp = x_pad_shape
    ho = out_extent(hp, k, stride, 0)
    wo = out_extent(wp, k, stride, 0)
    d6 = dcols.reshape(n, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
    dx_pad = np.zeros(x_pad_shape, dtype=dcols.dtype)
    for u in range(k):
        for v in range(k):
            dx_pad[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += d6[:, :, :, :, u, v]
    return dx_pad


class Conv2D(Layer):
    def __init__(self, in_channels, filters, kernel, stride=1, padding=0,
                 init="he", dtype=np.float32, rng=None):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        rng = rng or np.random.default_rng()
        fan_in = in_channels * kernel * kernel
        fan_out = filters * kernel * kernel
        std = np.sqrt(2.0 / fan_in) if init == "he" else np.sqrt(2.0 / (fan_in + fan_out))
        self.params["w"] = rng.normal(0.0, std, (filters, in_channels, kernel, kernel)).astype(dtype)
        self.params["b"] = np.zeros(filters, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        n, c, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.padding
        if h + 2 * p < k or w + 2 * p < k:
            raise KernelLargerThanInput(
                f"kernel {k} exceeds padded input {h + 2 * p}x{w + 2 * p}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        ho = out_extent(h, k, s, p)
        wo = out_extent(w, k, s, p)
        cols = _windows(xp, k, s).transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        w_mat = self.params["w"].reshape(self.filters, -1)
        out = cols @ w_mat.T + self.params["b"]
        self._cache = (cols, xp.shape, (n, ho, wo))
        return out.reshape(n, ho, wo, self.filters).transpose(0, 3, 1, 2)

    def backward(self, dout):
        cols, xp_shape, (n, ho, wo) = self._pop_cache()
        k, s, p = self.kernel, self.stride, self.padding
        dout_mat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, self.filters)
        self.grads["b"] = dout_mat.sum(axis=0)
        self.grads["w"] = (dout_mat.T @ cols).reshape(self.params["w"].shape)
        dcols = dout_mat @ self.params["w"].reshape(self.filters, -1)
        dx_pad = _col2im(dcols, xp_shape, k, s)
        if p:
            return dx_pad[:, :, p:-p, p:-p]
        return dx_pad


class Pool2D(Layer):
    def __init__(self, kind, size, stride, padding=0):
        super().__init__()
        if kind not in ("max", "avg"):
            raise ValueError(f"pool kind must be max or avg, got {kind!r}")
        self.kind = kind
        self.size = size
        self.stride = stride
        self.padding = padding

    def _window_slices(self, ho, wo):
        k, s = self.size, self.stride
        for u in range(k):
            for v in range(k):
                yield u, v, (slice(None), slice(None),
                             slice(u, u + s * ho, s), slice(v, v + s * wo, s))

    def forward(self, x, train=False, rng=None):
        n, c, h, w = x.shape
        k, s, p = self.size, self.stride, self.padding
        if h + 2 * p < k or w + 2 * p < k:
            raise WindowLargerThanInput(
                f"window {k} exceeds padded input {h + 2 * p}x{w + 2 * p}")
        pad_value = -np.inf if self.kind == "max" else 0.0
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=pad_value) if p else x
        ho = out_extent(h, k, s, p)
        wo = out_extent(w, k, s, p)
        if self.kind == "max":
            out = None
            for _, _, sl in self._window_slices(ho, wo):
                out = xp[sl].copy() if out is None else np.maximum(out, xp[sl], out=out)
            self._cache = (xp, out, x.shape)
        else:
            out = np.zeros((n, c, ho, wo), dtype=x.dtype)
            for _, _, sl in self._window_slices(ho, wo):
                out += xp[sl]
            # padded cells are excluded from the averaging denominator
            if p:
                real = np.pad(np.ones((1, 1, h, w), dtype=x.dtype),
                              ((0, 0), (0, 0), (p, p), (p, p)))
                counts = np.zeros((1, 1, ho, wo), dtype=x.dtype)
                for _, _, sl in self._window_slices(ho, wo):
                    counts += real[sl]
            else:
                counts = np.full((1, 1, ho, wo), float(k * k), dtype=x.dtype)
            out /= counts
            self._cache = (counts, xp.shape, x.shape)
        return out

    def backward(self, dout):
        cache = self._pop_cache()
        k, s, p = self.size, self.stride, self.padding
        ho, wo = dout.shape[2], dout.shape[3]
        if self.kind == "max":
            xp, out, x_shape = cache
            dx_pad = np.zeros(xp.shape, dtype=dout.dtype)
            # route each window's gradient to the first position holding the max
            alive = np.ones(dout.shape, dtype=bool)
            for _, _, sl in self._window_slices(ho, wo):
                hit = (xp[sl] == out) & alive
                dx_pad[sl] += dout * hit
                alive &= ~hit
        else:
            counts, xp_shape, x_shape = cache
            dx_pad = np.zeros(xp_shape, dtype=dout.dtype)
            contrib = dout / counts
            for _, _, sl in self._window_slices(ho, wo):
                dx_pad[sl] += contrib
        if p:
            return dx_pad[:, :, p:-p, p:-p]
        return dx_pad


class BatchNorm2D(Layer):
    def __init__(self, channels, eps=1e-5, momentum=0.9, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        n, c = x.shape[0], x.shape[1]
        x3 = x.reshape(n, c, -1)
        m = x3.shape[0] * x3.shape[2]
        if train:
            if n < 2:
                raise SingletonBatchInTrainMode("batch norm needs batch >= 2 to train")
            mean = np.einsum("ncs->c", x3) / m
            xc = x3 - mean[None, :, None]
            var = np.einsum("ncs,ncs->c", xc, xc) / m
            mom = self.momentum
            self.running_mean = (mom * self.running_mean + (1 - mom) * mean).astype(self.running_mean.dtype)
            self.running_var = (mom * self.running_var + (1 - mom) * var).astype(self.running_var.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
            xc = x3 - mean[None, :, None]
        inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = xc
        xhat *= inv_std[None, :, None]
        out = xhat * self.params["gamma"][None, :, None]
        out += self.params["beta"][None, :, None]
        self._cache = (xhat, inv_std, m, train, x.shape)
        return out.reshape(x.shape)

    def backward(self, dout):
        xhat, inv_std, m, train, shape = self._pop_cache()
        n, c = shape[0], shape[1]
        d3 = dout.reshape(n, c, -1)
        self.grads["gamma"] = np.einsum("ncs,ncs->c", d3, xhat)
        self.grads["beta"] = np.einsum("ncs->c", d3)
        dxhat = d3 * self.params["gamma"][None, :, None]
        if not train:
            dxhat *= inv_std[None, :, None]
            return dxhat.reshape(shape)
        s1 = np.einsum("ncs->c", dxhat) / m
        s2 = np.einsum("ncs,ncs->c", dxhat, xhat) / m
        dx = dxhat
        dx -= s1[None, :, None]
        dx -= xhat * s2[None, :, None]
        dx *= inv_std[None, :, None]
        return dx.reshape(shape)

    def state_arrays(self):
        d = dict(self.params)
        d["running_mean"] = self.running_mean
        d["running_var"] = self.running_var
        return d


class ActivationLayer(Layer):
    def __init__(self, kind):
        super().__init__()
        if kind not in ("tanh", "relu"):
            raise ValueError(f"activation must be tanh or relu, got {kind!r}")
        self.kind = kind

    def forward(self, x, train=False, rng=None):
        if self.kind == "tanh":
            out = np.tanh(x)
            self._cache = out
        else:
            out = np.maximum(x, 0)
            self._cache = x > 0
        return out

    def backward(self, dout):
        cache = self._pop_cache()
        if self.kind == "tanh":
            return dout * (1.0 - cache * cache)
        return dout * cache


class FlattenLayer(Layer):
    def forward(self, x, train=False, rng=None):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._pop_cache())


class DenseLayer(Layer):
    def __init__(self, in_features, units, init="he", dtype=np.float32, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng()
        std = np.sqrt(2.0 / in_features) if init == "he" else np.sqrt(2.0 / (in_features + units))
        self.params["w"] = rng.normal(0.0, std, (in_features, units)).astype(dtype)
        self.params["b"] = np.zeros(units, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        self._cache = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, dout):
        x = self._pop_cache()
        self.grads["w"] = x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["w"].T


class DropoutLayer(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) so eval is identity."""

    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._cache = ()
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype)
        scale = 1.0 / (1.0 - self.rate)
        self._cache = (mask, scale)
        return x * mask * scale

    def backward(self, dout):
        cache = self._pop_cache()
        if cache == ():
            return dout
        mask, scale = cache
        return dout * mask * scale


class SoftmaxLayer(Layer):
    def forward(self, x, train=False, rng=None):
        probs = softmax(x)
        self._cache = probs
        return probs

    def backward(self, dout):
        p = self._pop_cache()
        return p * (dout - (dout * p).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    logits = np.asarray(logits)
    if logits.ndim == 1:
        return softmax(logits[None, :])[0]
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(x) if kind == "tanh" else np.maximum(x, 0)


def cross_entropy(probs: np.ndarray, onehot: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. probs.

    Probabilities are floored at 1e-12 before the log.
    """
    probs = np.asarray(probs)
    onehot = np.asarray(onehot)
    if probs.shape != onehot.shape:
        raise ShapeMismatch(f"probs {probs.shape} vs labels {onehot.shape}")
    if probs.ndim == 1:
        probs, onehot = probs[None, :], onehot[None, :]
    n = probs.shape[0]
    clamped = np.maximum(probs, PROB_FLOOR)
    loss = -(onehot * np.log(clamped)).sum() / n
    dprobs = -(onehot / clamped) / n
    return float(loss), dprobs
