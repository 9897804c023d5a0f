"""Central finite-difference verification of analytic gradients.

The scalar probe is L = sum(forward(x) * R) for a fixed random R, so the
analytic gradient is a single backward(R) pass. Checks run in 64-bit.
"""

from __future__ import annotations

import numpy as np

GRADCHECK_H = 1e-5
GRADCHECK_TOL = 1e-4


def numerical_gradient(f, x: np.ndarray, h: float = GRADCHECK_H) -> np.ndarray:
    """Central differences of scalar f() w.r.t. x, perturbing x in place."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
        it.iternext()
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())


def check_layer(layer, x: np.ndarray, train: bool = True, rng_seed: int = 0,
                h: float = GRADCHECK_H) -> dict[str, float]:
    """Max relative error of input and parameter gradients for one layer.

    The forward pass is re-seeded identically on every probe call so
    stochastic layers (dropout) see the same mask throughout the check.
    """
    x = x.astype(np.float64)
    rng0 = np.random.default_rng(rng_seed)
    probe = rng0.normal(size=layer.forward(x, train=train,
                                           rng=np.random.default_rng(rng_seed)).shape)

    def scalar():
        out = layer.forward(x, train=train, rng=np.random.default_rng(rng_seed))
        return float((out * probe).sum())

    # analytic pass
    layer.forward(x, train=train, rng=np.random.default_rng(rng_seed))
    dx = layer.backward(probe)

    errors = {"input": max_relative_error(dx, numerical_gradient(scalar, x, h))}
    for name, param in layer.params.items():
        analytic = layer.grads[name].astype(np.float64)
        errors[name] = max_relative_error(analytic, numerical_gradient(scalar, param, h))
    return errors
