"""Optimizers and the step learning-rate schedule.

Update rules, per parameter ``p`` with gradient ``g`` and rate ``lr``:

sgd-nesterov (momentum ``mu``)::

    v <- mu * v + g
    p <- p - lr * (g + mu * v)

With ``mu = 0`` this is plain gradient descent.

adam (``b1, b2, eps``, step count ``t`` starting at 1)::

    m <- b1 * m + (1 - b1) * g
    v <- b2 * v + (1 - b2) * g**2
    p <- p - lr * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ParameterError


def _lrs(lr, n):
    if np.ndim(lr) == 0:
        return [float(lr)] * n
    lr = list(lr)
    if len(lr) != n:
        raise DimensionError(f"got {len(lr)} learning rates for {n} parameters")
    return [float(x) for x in lr]


def _check(params, grads, slots):
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != np.shape(g):
            raise DimensionError(f"parameter {i}: shape {p.shape} vs gradient {np.shape(g)}")
        if slots is not None and slots[i].shape != p.shape:
            raise DimensionError(f"parameter {i}: optimizer slot shape {slots[i].shape} "
                                 f"does not match {p.shape}")


class SGDNesterov:
    kind = "sgd-nesterov"

    def __init__(self, momentum: float = 0.9):
        if not 0.0 <= momentum < 1.0:
            raise ParameterError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = momentum
        self.velocity = None

    def step(self, params: list, grads: list, lr) -> None:
        """Update ``params`` in place."""
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        _check(params, grads, self.velocity)
        mu = self.momentum
        for p, g, v, rate in zip(params, grads, self.velocity, _lrs(lr, len(params))):
            if mu == 0.0:
                p -= rate * g
                continue
            v *= mu
            v += g
            p -= rate * (g + mu * v)


class Adam:
    kind = "adam"

    def __init__(self, betas=(0.9, 0.999), eps: float = 1e-8):
        b1, b2 = betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0) or eps <= 0:
            raise ParameterError(f"invalid Adam settings betas={betas} eps={eps}")
        self.betas = (float(b1), float(b2))
        self.eps = float(eps)
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: list, grads: list, lr) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        _check(params, grads, self.m)
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v, rate in zip(params, grads, self.m, self.v, _lrs(lr, len(params))):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(kind: str, momentum: float = 0.9, betas=(0.9, 0.999), eps: float = 1e-8):
    if kind == "sgd-nesterov":
        return SGDNesterov(momentum)
    if kind == "adam":
        return Adam(betas, eps)
    raise ParameterError(f"unknown optimizer {kind!r}")


@dataclass(frozen=True)
class LrSchedule:
    """``rate(e) = initial * factor ** #{d in drop_epochs : d <= e}``, epochs 1-based."""

    initial: float
    factor: float = 0.1
    drop_epochs: tuple = ()

    def rate(self, epoch: int) -> float:
        drops = sum(1 for d in self.drop_epochs if d <= epoch)
        return self.initial * self.factor ** drops
