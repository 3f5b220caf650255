"""Dense float64 arithmetic helpers, softmax machinery, the seeded RNG and
the finite-difference gradient oracle.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64 in C
(row-major) order. ``as_matrix`` / ``as_vector`` validate and coerce.

RNG
---
``RngStream`` is SplitMix64 (Steele, Lea & Flood, 2014)::

    state  <- state + 0x9E3779B97F4A7C15            (mod 2**64)
    z      <- state
    z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2**64)
    z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2**64)
    output <- z ^ (z >> 31)

The initial state is the 64-bit seed. Derived values:

* uniform in [0, 1): ``(output >> 11) * 2**-53``
* standard normal: Box-Muller, one normal per two consecutive uniforms
  ``u1, u2``: ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``. The sine branch is
  discarded so that every normal costs exactly two outputs.
* permutation of n items: stable argsort of n consecutive uniforms.
* child streams: ``substream(i)`` is seeded with output ``i`` (0-based) of a
  fresh SplitMix64 started from the parent's *seed*; it does not advance the
  parent.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DimensionError, NumericInputError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    check_finite(arr, name)
    return arr


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.ascontiguousarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str = "input") -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericInputError(f"{name} contains NaN or Inf")


def softmax(z, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis`` (max-subtracted)."""
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[axis] == 0:
        raise DimensionError("softmax of an empty vector")
    check_finite(z, "logits")
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[axis] == 0:
        raise DimensionError("log_softmax of an empty vector")
    check_finite(z, "logits")
    shifted = z - z.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def entropy(p, axis: int = -1) -> np.ndarray:
    """Shannon entropy in nats; ``0 log 0`` is taken as 0."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=axis)


def numerical_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericInputError(f"function returned a non-finite value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric) -> float:
    """max_i |a_i - n_i| / max(1, |a_i|, |n_i|)."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise DimensionError(f"gradient shapes differ: {a.shape} vs {n.shape}")
    if a.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))


def grad_check(f: Callable[[np.ndarray], float], x, analytic, h: float = 1e-5) -> float:
    """Max relative error between ``analytic`` and the central-difference
    gradient of ``f`` at ``x``."""
    check_finite(np.asarray(analytic, dtype=np.float64), "analytic gradient")
    return relative_error(analytic, numerical_gradient(f, x, h))


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class RngStream:
    """SplitMix64 stream. Not thread-safe; one owner per stream."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.state = seed

    def next_u64(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
        counters = steps + np.uint64(self.state)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return _mix64(counters)

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def gaussian(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def substream(self, index: int) -> "RngStream":
        child_seeds = RngStream(self.seed).next_u64(index + 1)
        return RngStream(int(child_seeds[index]))


def rng_uniform(stream: RngStream, n: int) -> np.ndarray:
    return stream.uniform(n)


def rng_gaussian(stream: RngStream, n: int) -> np.ndarray:
    return stream.gaussian(n)
