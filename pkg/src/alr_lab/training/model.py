"""Multi-layer perceptron with hand-written backpropagation.

Layer ``l`` maps ``a -> a @ W_l.T + b_l`` with ``W_l`` of shape
``(out, in)``. Hidden layers apply a ReLU, the output layer is linear and
produces logits; softmax is left to the losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, StaleCacheError
from ..numeric import RngStream


@dataclass
class ForwardCache:
    inputs: list          # activation entering each layer
    pre: list             # pre-activation of each hidden layer
    version: int
    single: bool


class MlpModel:
    def __init__(self, weights: list, biases: list):
        if len(weights) != len(biases) or not weights:
            raise DimensionError("need one bias per weight matrix and at least one layer")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DimensionError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise DimensionError(f"layer {i}: input width {w.shape[1]} does not match "
                                     f"previous output {self.weights[i - 1].shape[0]}")
        self.version = 0

    @classmethod
    def init(cls, dims, stream: RngStream) -> "MlpModel":
        """He-normal weights (std ``sqrt(2 / fan_in)``), zero biases.

        Weights are drawn layer by layer, each matrix row-major.
        """
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise DimensionError(f"invalid layer dims {dims}")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = stream.gaussian(fan_in * fan_out).reshape(fan_out, fan_in)
            weights.append(w * np.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def dims(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list:
        """Parameter arrays in the order ``[W_0, b_0, W_1, b_1, ...]`` (live references)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def mark_updated(self) -> None:
        self.version += 1

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x):
        """Logits for ``x`` of shape ``(d,)`` or ``(B, d)``, plus the backward cache."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        a = np.atleast_2d(x)
        if a.ndim != 2 or a.shape[1] != self.dims[0]:
            raise DimensionError(f"expected inputs of width {self.dims[0]}, got shape {x.shape}")
        inputs, pre = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            h = a @ w.T + b
            if i < last:
                pre.append(h)
                a = np.maximum(h, 0.0)
            else:
                a = h
        cache = ForwardCache(inputs, pre, self.version, single)
        return (a[0] if single else a), cache

    def backward(self, cache: ForwardCache, grad_z) -> list:
        """Parameter gradients given ``dL/dz``; same order as ``params()``."""
        if cache.version != self.version:
            raise StaleCacheError("forward cache predates the latest parameter update")
        g = np.atleast_2d(np.asarray(grad_z, dtype=np.float64))
        if g.shape != (cache.inputs[0].shape[0], self.num_classes):
            raise DimensionError(f"grad_z has shape {np.shape(grad_z)}, expected "
                                 f"{(cache.inputs[0].shape[0], self.num_classes)}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = g.T @ cache.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i]) * (cache.pre[i - 1] > 0)
        return grads


def forward(model: MlpModel, x):
    return model.forward(x)


def backward(model: MlpModel, cache: ForwardCache, grad_z) -> list:
    return model.backward(cache, grad_z)
