"""The cat/dog/plane example where hard and soft KD gradients disagree."""

from __future__ import annotations

import numpy as np

from . import labels as lab
from .losses import KDConfig, hard_ce, kd_soft_loss, kd_target

CLASSES = ("cat", "dog", "plane")
P_STUDENT = np.array([0.7, 0.2, 0.1])
Q_SOFT = np.array([0.6, 0.3, 0.1])
TRUTH = 0


def kd_contradiction(p=P_STUDENT, q_soft=Q_SOFT, k: int = TRUTH, temperature: float = 1.0) -> dict:
    """Gradients of the hard and soft losses at logits ``log p``."""
    z = np.log(np.asarray(p, dtype=np.float64))
    _, g_hard = hard_ce(z, k)
    _, g_soft = kd_soft_loss(z, q_soft, temperature)
    return {
        "p": np.asarray(p, dtype=np.float64),
        "q": lab.one_hot(k, len(p)),
        "q_soft": np.asarray(q_soft, dtype=np.float64),
        "grad_hard": g_hard,
        "grad_soft": g_soft,
        "sign_hard": int(np.sign(g_hard[k])),
        "sign_soft": int(np.sign(g_soft[k])),
    }


def report(samples=((0.0, 1.0), (0.5, 1.0), (0.9, 1.0), (0.5, 2.0), (0.5, 4.0))) -> str:
    r = kd_contradiction()
    if r["sign_hard"] == r["sign_soft"]:
        raise AssertionError("hard and soft gradients unexpectedly agree on the true class")
    fmt = lambda v: "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
    c = CLASSES[TRUTH]
    lines = [
        f"classes              {list(CLASSES)}  (ground truth: {c})",
        f"p (student)          {fmt(r['p'])}",
        f"q (hard label)       {fmt(r['q'])}",
        f"q_soft (teacher)     {fmt(r['q_soft'])}",
        f"dL_hard/dz_{c}       {r['grad_hard'][TRUTH]:+.6g}  (sign {r['sign_hard']:+d}: raises p_{c})",
        f"dL_soft/dz_{c}       {r['grad_soft'][TRUTH]:+.6g}  (sign {r['sign_soft']:+d}: lowers p_{c})",
        "the two terms pull the ground-truth confidence in opposite directions",
        "",
        "blended fixed point kd_target(alpha, T):",
    ]
    for a, T in samples:
        lines.append(f"  alpha={a:<4g} T={T:<4g} -> {fmt(kd_target(TRUTH, Q_SOFT, KDConfig(a, T)))}")
    return "\n".join(lines)
