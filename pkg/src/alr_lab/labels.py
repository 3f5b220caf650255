"""Label encodings and the erase/unerase index mapping.

Class indices are zero-based: class ``c`` in a 1-based label space
``{1, ..., K}`` is stored as ``c - 1``. Use ``from_one_based`` /
``to_one_based`` at I/O boundaries that speak the 1-based convention.

Residual positions: for a ground-truth class ``k``, residual position ``j``
in ``[0, K-1)`` refers to full class ``j`` if ``j < k`` else ``j + 1``.
"""

from __future__ import annotations

import numpy as np

from .errors import ClassIndexError, DimensionError, ParameterError

DEFAULT_SMOOTHING = 0.1


def check_class(k: int, num_classes: int) -> int:
    if num_classes < 2:
        raise DimensionError(f"need at least 2 classes, got K={num_classes}")
    if isinstance(k, (bool, np.bool_)) or int(k) != k:
        raise ClassIndexError(f"class index must be an integer, got {k!r}")
    k = int(k)
    if not 0 <= k < num_classes:
        raise ClassIndexError(f"class index {k} out of range for K={num_classes}")
    return k


def from_one_based(c: int, num_classes: int) -> int:
    return check_class(int(c) - 1, num_classes)


def to_one_based(k: int) -> int:
    return int(k) + 1


def one_hot(k: int, num_classes: int) -> np.ndarray:
    k = check_class(k, num_classes)
    q = np.zeros(num_classes)
    q[k] = 1.0
    return q


def smooth(k: int, num_classes: int, epsilon: float = DEFAULT_SMOOTHING) -> np.ndarray:
    """Smoothed target: ``1 - epsilon`` on ``k``, ``epsilon / (K-1)`` elsewhere."""
    if not 0.0 <= epsilon < 1.0:
        raise ParameterError(f"smoothing epsilon must lie in [0, 1), got {epsilon}")
    k = check_class(k, num_classes)
    q = np.full(num_classes, epsilon / (num_classes - 1))
    q[k] = 1.0 - epsilon
    return q


def smooth_rows(labels, num_classes: int, epsilon: float = DEFAULT_SMOOTHING) -> np.ndarray:
    """Batched ``smooth``: one smoothed target row per label."""
    if not 0.0 <= epsilon < 1.0:
        raise ParameterError(f"smoothing epsilon must lie in [0, 1), got {epsilon}")
    labels = np.asarray(labels, dtype=np.int64)
    q = np.full((labels.size, num_classes), epsilon / (num_classes - 1))
    q[np.arange(labels.size), labels] = 1.0 - epsilon
    return q


def residual_to_class(j: int, k: int) -> int:
    """Full class index of residual position ``j`` for ground truth ``k``."""
    return j if j < k else j + 1


def erase(v, k: int) -> np.ndarray:
    """Drop coordinate ``k`` along the last axis, keeping the others in order."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] < 2:
        raise DimensionError(f"erase needs a vector of length >= 2, got shape {v.shape}")
    k = check_class(k, v.shape[-1])
    return np.concatenate([v[..., :k], v[..., k + 1:]], axis=-1)


def unerase(v_res, k: int, fill: float = 0.0) -> np.ndarray:
    """Inverse of ``erase``: re-insert ``fill`` at position ``k``."""
    v_res = np.asarray(v_res, dtype=np.float64)
    if v_res.ndim == 0 or v_res.shape[-1] < 1:
        raise DimensionError(f"unerase needs a non-empty vector, got shape {v_res.shape}")
    k = check_class(k, v_res.shape[-1] + 1)
    shape = v_res.shape[:-1] + (1,)
    return np.concatenate([v_res[..., :k], np.full(shape, float(fill)), v_res[..., k:]], axis=-1)


def erase_rows(z: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Batched erase: row ``i`` of ``z`` (B x K) loses column ``labels[i]``."""
    z = np.asarray(z, dtype=np.float64)
    B, K = z.shape
    if K < 2:
        raise DimensionError(f"erase needs K >= 2, got K={K}")
    keep = np.ones((B, K), dtype=bool)
    keep[np.arange(B), labels] = False
    return z[keep].reshape(B, K - 1)


def unerase_rows(v_res: np.ndarray, labels: np.ndarray, fill: float = 0.0) -> np.ndarray:
    """Batched unerase, the inverse of ``erase_rows``."""
    B, Km1 = v_res.shape
    out = np.full((B, Km1 + 1), float(fill))
    keep = np.ones((B, Km1 + 1), dtype=bool)
    keep[np.arange(B), labels] = False
    out[keep] = v_res.reshape(-1)
    return out
