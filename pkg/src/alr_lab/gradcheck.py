"""Finite-difference verification of every analytic gradient in the package.

Stop-gradient terms are checked against a surrogate objective in which the
detached quantities (the residual label inside the residual loss, the
network output inside the update loss) are frozen at the evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import labels as lab
from . import losses
from .numeric import RngStream, grad_check, softmax
from .residual import ResidualCorrelationMatrix
from .training.model import MlpModel

LOSS_TOL = 1e-6
MLP_TOL = 1e-5
LOSS_TERMS = ("hard", "soft", "kd_total", "res", "upd", "total")


@dataclass
class CheckRow:
    name: str
    num_classes: int
    points: int
    max_rel_error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _simplex(stream: RngStream, n: int) -> np.ndarray:
    return softmax(2.0 * stream.gaussian(n))


def _term_point(name: str, K: int, stream: RngStream, normalize: bool):
    """One random instance: ``(f, x0, analytic_grad)``."""
    z0 = 3.0 * stream.gaussian(K)
    k = int(stream.uniform(1)[0] * K)
    if name == "hard":
        smoothing = float(stream.uniform(1)[0]) * 0.5
        target = k if smoothing < 0.25 else lab.smooth(k, K, smoothing)
        f = lambda z: losses.hard_ce(z, target, normalize=normalize)[0]
        return f, z0, losses.hard_ce(z0, target, normalize=normalize)[1]
    if name == "soft":
        q = _simplex(stream, K)
        T = float((1.0, 2.0, 4.0)[int(stream.uniform(1)[0] * 3)])
        f = lambda z: losses.kd_soft_loss(z, q, T, normalize=normalize)[0]
        return f, z0, losses.kd_soft_loss(z0, q, T, normalize=normalize)[1]
    if name == "kd_total":
        q = _simplex(stream, K)
        a, t = stream.uniform(2)
        cfg = losses.KDConfig(float(a), 0.5 + 4.0 * float(t))
        f = lambda z: losses.kd_total(z, k, q, cfg, normalize=normalize)[0]
        return f, z0, losses.kd_total(z0, k, q, cfg, normalize=normalize)[1]
    if name == "res":
        q = _simplex(stream, K - 1)
        f = lambda z: losses.residual_loss(z, k, q, normalize=normalize)[0]
        return f, z0, losses.residual_loss(z0, k, q, normalize=normalize)[1]
    if name == "upd":
        S0 = 2.0 * stream.gaussian(K * (K - 1)).reshape(K, K - 1)
        f = lambda s: losses.update_loss(z0, k, ResidualCorrelationMatrix(s), normalize=normalize)[0]
        g = losses.update_loss(z0, k, ResidualCorrelationMatrix(S0), normalize=normalize)[1]
        return f, S0, g
    if name == "total":
        S0 = 2.0 * stream.gaussian(K * (K - 1)).reshape(K, K - 1)
        acc = float(stream.uniform(1)[0])
        bundle = losses.total_loss(z0, k, ResidualCorrelationMatrix(S0), acc, normalize=normalize)
        q_frozen = softmax(S0[k])
        x0 = np.concatenate([z0, S0[k]])

        def f(x):
            z, row = x[:K], x[K:]
            S = S0.copy()
            S[k] = row
            return (losses.hard_ce(z, k, normalize=normalize)[0]
                    + (1 - acc) * losses.residual_loss(z, k, q_frozen, normalize=normalize)[0]
                    + losses.update_loss(z0, k, ResidualCorrelationMatrix(S), normalize=normalize)[0])

        return f, x0, np.concatenate([bundle.grad_z, bundle.grad_S_row])
    raise ValueError(f"unknown loss term {name!r}")


def check_term(name: str, K: int, points: int = 100, seed: int = 0, h: float = 1e-5,
               normalize: bool = False, corrupt: bool = False) -> CheckRow:
    stream = RngStream(seed).substream(LOSS_TERMS.index(name) * 100 + K)
    worst = 0.0
    for _ in range(points):
        f, x0, g = _term_point(name, K, stream, normalize)
        if corrupt:
            g = g + 1e-3
        worst = max(worst, grad_check(f, x0, g, h))
    return CheckRow(name, K, points, worst, LOSS_TOL)


def check_mlp(points: int = 50, dims=(5, 8, 4), batch: int = 3, seed: int = 0,
              h: float = 1e-5, normalize: bool = False, corrupt: bool = False) -> CheckRow:
    """End-to-end total-loss gradient over all MLP parameters and S jointly."""
    K = dims[-1]
    stream = RngStream(seed).substream(999)
    worst = 0.0
    for _ in range(points):
        model = MlpModel.init(dims, stream)
        for b in model.biases:
            b += 0.1 * stream.gaussian(b.size)
        x = stream.gaussian(batch * dims[0]).reshape(batch, dims[0])
        y = (stream.uniform(batch) * K).astype(np.int64)
        S0 = stream.gaussian(K * (K - 1)).reshape(K, K - 1)
        acc = float(stream.uniform(1)[0])
        z0, cache = model.forward(x)
        bundle = losses.total_loss(z0, y, ResidualCorrelationMatrix(S0), acc, normalize=normalize)
        grads = model.backward(cache, bundle.grad_z) + [bundle.grad_S]
        shapes = [p.shape for p in model.params()] + [S0.shape]
        sizes = [int(np.prod(s)) for s in shapes]
        theta0 = np.concatenate([p.reshape(-1) for p in model.params()] + [S0.reshape(-1)])
        analytic = np.concatenate([g.reshape(-1) for g in grads])
        if corrupt:
            analytic = analytic + 1e-3
        q_frozen = softmax(S0, axis=1)[y]

        def f(theta):
            parts = np.split(theta, np.cumsum(sizes)[:-1])
            arrays = [p.reshape(s) for p, s in zip(parts, shapes)]
            m = MlpModel(arrays[0:-1:2], arrays[1:-1:2])
            z, _ = m.forward(x)
            S = ResidualCorrelationMatrix(arrays[-1])
            return (losses.hard_ce(z, y, normalize=normalize)[0]
                    + (1 - acc) * losses.residual_loss(z, y, q_frozen, normalize=normalize)[0]
                    + losses.update_loss(z0, y, S, normalize=normalize)[0])

        worst = max(worst, grad_check(f, theta0, analytic, h))
    return CheckRow("mlp_end_to_end", K, points, worst, MLP_TOL)


def run_gradcheck(points: int = 100, classes=(3, 6, 10), mlp_points: int | None = None, seed: int = 0,
                  normalize: bool = False, corrupt: str | None = None) -> list:
    """All checks; ``corrupt`` names a term whose analytic gradient is perturbed."""
    rows = []
    for name in LOSS_TERMS:
        for K in classes:
            rows.append(check_term(name, K, points, seed, normalize=normalize, corrupt=corrupt == name))
    rows.append(check_mlp(points if mlp_points is None else mlp_points, seed=seed, normalize=normalize, corrupt=corrupt == "mlp"))
    return rows


def format_report(rows) -> str:
    lines = [f"{'term':<16}{'K':>4}{'points':>8}{'max rel err':>14}{'tol':>9}  status"]
    for r in rows:
        lines.append(f"{r.name:<16}{r.num_classes:>4}{r.points:>8}{r.max_rel_error:>14.3e}"
                     f"{r.tolerance:>9.0e}  {'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines)
