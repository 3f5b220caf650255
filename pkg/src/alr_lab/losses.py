"""Loss terms with analytic gradients with respect to logits (and S).

Every loss accepts a single logit vector ``(K,)`` or a batch ``(B, K)``.
Batch losses and gradients are arithmetic means over samples, so the
returned gradient has the shape of ``z`` and a single sample behaves like a
batch of one.

``normalize=False`` (the default) drops the ``1/K`` and ``1/(K-1)``
prefactors so that gradients are exactly ``p - q`` and ``p_res - q_res``.
``normalize=True`` restores the prefactors and scales gradients to match.

Stop-gradient routing: ``residual_loss`` treats the residual label as a
constant (no gradient to S); ``update_loss`` treats the logits as constants
(no gradient to the backbone).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import labels as lab
from .errors import DimensionError, ParameterError
from .numeric import check_finite, log_softmax, softmax
from .residual import ResidualCorrelationMatrix


@dataclass(frozen=True)
class KDConfig:
    alpha: float = 0.5
    temperature: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.temperature > 0:
            raise ParameterError(f"temperature must be positive, got {self.temperature}")


@dataclass
class LossBundle:
    hard: float
    res: float
    upd: float
    total: float
    grad_z: np.ndarray
    grad_S: np.ndarray
    res_weight: float
    labels: np.ndarray

    @property
    def grad_S_row(self) -> np.ndarray:
        """Gradient on the S row of the ground-truth class (single sample only)."""
        if self.labels.size != 1:
            raise DimensionError("grad_S_row is defined for a single sample; use grad_S")
        return self.grad_S[int(self.labels[0])]


def _batch(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim not in (1, 2) or z.shape[-1] < 1 or z.size == 0:
        raise DimensionError(f"logits must be (K,) or (B, K), got shape {z.shape}")
    check_finite(z, "logits")
    single = z.ndim == 1
    return np.atleast_2d(z), single


def _labels(labels, batch: int, num_classes: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(labels))
    if arr.ndim != 1 or arr.size != batch:
        raise DimensionError(f"expected {batch} labels, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ParameterError("labels must be integer class indices")
    if num_classes < 2:
        raise DimensionError(f"need at least 2 classes, got K={num_classes}")
    if arr.min() < 0 or arr.max() >= num_classes:
        raise lab.ClassIndexError(f"label out of range for K={num_classes}")
    return arr.astype(np.int64)


def _probs(q, shape, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1 and q.shape == shape[-1:]:
        q = np.broadcast_to(q, shape)
    if q.shape != shape:
        raise DimensionError(f"{name} must have shape {shape[-1:]} or {shape}, got {q.shape}")
    check_finite(q, name)
    return q


def _out(grad, single):
    return grad[0] if single else grad


def _is_label_target(target) -> bool:
    arr = np.asarray(target)
    return np.issubdtype(arr.dtype, np.integer) and arr.ndim <= 1


def hard_ce(z, target, *, normalize: bool = False):
    """Cross-entropy against class indices or probability targets.

    ``target`` is an integer class (or batch of classes) or a probability
    vector / matrix such as a smoothed label. Returns ``(loss, grad_z)``.
    """
    zb, single = _batch(z)
    B, K = zb.shape
    if _is_label_target(target):
        k = _labels(target, B, K)
        q = np.zeros((B, K))
        q[np.arange(B), k] = 1.0
    else:
        q = _probs(target, (B, K), "target")
    c = 1.0 / K if normalize else 1.0
    loss = -c * float(np.sum(q * log_softmax(zb)) / B)
    grad = c * (softmax(zb) - q) / B
    return loss, _out(grad, single)


def kd_soft_loss(z, q_soft, temperature: float = 1.0, *, normalize: bool = False):
    """Cross-entropy between ``softmax(z / T)`` and the soft target ``q_soft``."""
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    zb, single = _batch(z)
    B, K = zb.shape
    q = _probs(q_soft, (B, K), "q_soft")
    c = 1.0 / K if normalize else 1.0
    scaled = zb / temperature
    loss = -c * float(np.sum(q * log_softmax(scaled)) / B)
    grad = (c / temperature) * (softmax(scaled) - q) / B
    return loss, _out(grad, single)


def kd_total(z, target, q_soft, cfg: KDConfig, *, normalize: bool = False):
    """``(1 - alpha) * hard + alpha * T**2 * soft`` and its gradient."""
    a, T = cfg.alpha, cfg.temperature
    lh, gh = hard_ce(z, target, normalize=normalize)
    ls, gs = kd_soft_loss(z, q_soft, T, normalize=normalize)
    return (1 - a) * lh + a * T * T * ls, (1 - a) * gh + a * T * T * gs


def kd_target(k: int, q_soft, cfg: KDConfig) -> np.ndarray:
    """Blended fixed point ``((1-a) q + a T q_soft) / (1 - a + a T)``."""
    q_soft = np.asarray(q_soft, dtype=np.float64)
    q = lab.one_hot(k, q_soft.shape[-1])
    a, T = cfg.alpha, cfg.temperature
    return ((1 - a) * q + a * T * q_soft) / (1 - a + a * T)


def residual_loss(z, labels, q_res, *, normalize: bool = False):
    """Cross-entropy from the (constant) residual label to ``softmax(erase(z, k))``.

    The ground-truth coordinate of ``grad_z`` is exactly zero.
    """
    zb, single = _batch(z)
    B, K = zb.shape
    k = _labels(labels, B, K)
    q = _probs(q_res, (B, K - 1), "q_res")
    c = 1.0 / (K - 1) if normalize else 1.0
    z_res = lab.erase_rows(zb, k)
    loss = -c * float(np.sum(q * log_softmax(z_res)) / B)
    grad = lab.unerase_rows(c * (softmax(z_res) - q) / B, k, 0.0)
    return loss, _out(grad, single)


def update_loss(z_detached, labels, S: ResidualCorrelationMatrix, *, normalize: bool = False):
    """Cross-entropy from the (constant) erased network output to the residual label.

    Returns ``(loss, grad_S)`` with ``grad_S`` shaped like ``S.S``; only rows of
    classes present in ``labels`` are non-zero. No gradient reaches the logits.
    """
    zb, _ = _batch(z_detached)
    B, K = zb.shape
    if S.num_classes != K:
        raise DimensionError(f"S is for K={S.num_classes} but logits have K={K}")
    k = _labels(labels, B, K)
    c = 1.0 / (K - 1) if normalize else 1.0
    p_hat = softmax(lab.erase_rows(zb, k))
    log_q = log_softmax(S.S, axis=1)[k]
    loss = -c * float(np.sum(p_hat * log_q) / B)
    grad_S = np.zeros_like(S.S)
    np.add.at(grad_S, k, c * (np.exp(log_q) - p_hat) / B)
    return loss, grad_S


def total_loss(z, labels, S: ResidualCorrelationMatrix, acc_train: float,
               smoothing: float | None = None, *, normalize: bool = False) -> LossBundle:
    """``hard + (1 - acc_train) * res + upd`` with stop-gradient routing.

    With ``smoothing`` set, only the hard term's target is smoothed.
    """
    if not 0.0 <= acc_train <= 1.0:
        raise ParameterError(f"acc_train must lie in [0, 1], got {acc_train}")
    zb, single = _batch(z)
    B, K = zb.shape
    k = _labels(labels, B, K)
    if smoothing is None:
        hard, g_hard = hard_ce(zb, k, normalize=normalize)
    else:
        hard, g_hard = hard_ce(zb, lab.smooth_rows(k, K, smoothing), normalize=normalize)
    q_res = S.residual_labels(k)
    res, g_res = residual_loss(zb, k, q_res, normalize=normalize)
    upd, g_S = update_loss(zb, k, S, normalize=normalize)
    w = 1.0 - acc_train
    return LossBundle(
        hard=hard,
        res=res,
        upd=upd,
        total=hard + w * res + upd,
        grad_z=_out(g_hard + w * g_res, single),
        grad_S=g_S,
        res_weight=w,
        labels=k,
    )
