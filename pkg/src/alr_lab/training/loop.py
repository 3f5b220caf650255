"""End-to-end training loop, evaluation and metrics export.

The residual-loss weight is ``1 - acc_train`` where ``acc_train`` is the
running accuracy over the current epoch's batches seen so far, measured on
each batch's forward pass before its update. Before the first batch of an
epoch the tracker reports the previous epoch's final accuracy (0.0 for
epoch 1).

Random streams derived from the run seed: ``substream(2)`` initializes the
model, ``substream(3)`` draws one shuffle permutation per epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import labels as lab
from ..config import ExperimentConfig, q_soft_table
from ..datasets import Dataset, SynthSpec, generate, load_csv, preset
from ..errors import ConfigError, InputError
from ..losses import KDConfig, hard_ce, kd_total, total_loss
from ..numeric import RngStream
from ..residual import ResidualCorrelationMatrix
from .model import MlpModel
from .optim import LrSchedule, make_optimizer

METRICS_HEADER = ("epoch", "train_acc", "test_acc", "loss_hard", "loss_res", "loss_upd",
                  "loss_total", "res_weight", "mean_row_entropy")


class AccTracker:
    def __init__(self):
        self.correct = 0
        self.seen = 0
        self.previous = 0.0

    @property
    def accuracy(self) -> float:
        return self.correct / self.seen if self.seen else self.previous

    def update(self, correct: int, seen: int) -> None:
        self.correct += int(correct)
        self.seen += int(seen)

    def end_epoch(self) -> float:
        self.previous = self.accuracy
        self.correct = 0
        self.seen = 0
        return self.previous


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    test_acc: float
    loss_hard: float
    loss_res: float
    loss_upd: float
    loss_total: float
    res_weight: float
    mean_row_entropy: float   # NaN when the method has no residual matrix

    def csv_row(self) -> str:
        cells = []
        for name in METRICS_HEADER:
            v = getattr(self, name)
            if name == "epoch":
                cells.append(str(v))
            elif isinstance(v, float) and math.isnan(v):
                cells.append("")
            else:
                cells.append(f"{v:.9g}")
        return ",".join(cells)


@dataclass
class BatchInfo:
    """Passed to the ``on_batch`` hook after gradients are computed, before the step."""
    epoch: int
    index: int
    labels: np.ndarray
    logits: np.ndarray
    acc_train: float
    res_weight: float
    grad_z: np.ndarray
    S: Optional[np.ndarray]


@dataclass
class TrainState:
    model: MlpModel
    optimizer: object
    schedule: LrSchedule
    S: Optional[ResidualCorrelationMatrix]
    tracker: AccTracker
    rng: RngStream
    epoch: int = 0
    history: list = field(default_factory=list)


@dataclass
class TrainResult:
    state: TrainState
    history: list
    snapshots: dict          # epoch -> ResidualCorrelationMatrix used in that epoch's final batch
    num_classes: int

    @property
    def final(self) -> EpochRecord:
        return self.history[-1]


def evaluate(model: MlpModel, dataset: Dataset, top_m: int | None = None):
    """Return ``(accuracy, mean_hard_ce)`` or, with ``top_m``, ``(accuracy, mean_loss, top_m_acc)``.

    Ties in the argmax go to the lowest class index.
    """
    if len(dataset) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    z, _ = model.forward(dataset.features)
    y = dataset.labels
    acc = float(np.mean(np.argmax(z, axis=1) == y))
    loss, _ = hard_ce(z, y)
    if top_m is None:
        return acc, loss
    order = np.argsort(-z, axis=1, kind="stable")[:, :top_m]
    top = float(np.mean(np.any(order == y[:, None], axis=1)))
    return acc, loss, top


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    ds = cfg.dataset
    seed = cfg.seed if ds.seed is None else ds.seed
    if ds.preset is not None:
        train, test = preset(ds.preset, seed)
    elif ds.synth is not None:
        try:
            spec = SynthSpec(means=ds.synth.means, stds=ds.synth.stds, n_train=ds.synth.n_train,
                             n_test=ds.synth.n_test, seed=seed)
        except ValueError as exc:
            raise ConfigError("dataset.synth", str(exc)) from None
        train, test = generate(spec)
    else:
        try:
            train = load_csv(ds.train_csv, ds.has_header, ds.num_classes, "train")
            test = load_csv(ds.test_csv, ds.has_header, ds.num_classes, "test")
        except InputError as exc:
            raise ConfigError("dataset", str(exc)) from None
    K = max(train.num_classes, test.num_classes)
    if ds.num_classes is not None:
        K = ds.num_classes
    if train.dim != test.dim:
        raise ConfigError("dataset", f"train has {train.dim} features but test has {test.dim}")
    return train.with_num_classes(K), test.with_num_classes(K)


def build_state(cfg: ExperimentConfig, num_features: int, num_classes: int) -> TrainState:
    root = RngStream(cfg.seed)
    model = MlpModel.init([num_features, *cfg.model.hidden, num_classes], root.substream(2))
    opt = cfg.optimizer
    sched = cfg.schedule_config
    return TrainState(
        model=model,
        optimizer=make_optimizer(opt.kind, opt.momentum, opt.betas, opt.eps),
        schedule=LrSchedule(opt.lr, sched.drop_factor, tuple(sched.drop_epochs)),
        S=ResidualCorrelationMatrix.init_uniform(num_classes) if cfg.uses_residual else None,
        tracker=AccTracker(),
        rng=root.substream(3),
    )


def _batch_objective(cfg, state, z, y, acc, q_soft):
    """Loss components and gradients for one batch: ``(parts, grad_z, grad_S)``."""
    K = z.shape[1]
    norm = cfg.normalize_prefactor
    if cfg.uses_residual:
        b = total_loss(z, y, state.S, acc, cfg.hard_smoothing, normalize=norm)
        return (b.hard, b.res, b.upd, b.total, b.res_weight), b.grad_z, b.grad_S
    if cfg.method == "kd":
        kd = KDConfig(cfg.kd.alpha, cfg.kd.temperature)
        hard, _ = hard_ce(z, y, normalize=norm)
        total, g = kd_total(z, y, q_soft[y], kd, normalize=norm)
        return (hard, 0.0, 0.0, total, 0.0), g, None
    target = y if cfg.hard_smoothing is None else lab.smooth_rows(y, K, cfg.hard_smoothing)
    hard, g = hard_ce(z, target, normalize=norm)
    return (hard, 0.0, 0.0, hard, 0.0), g, None


def train(cfg: ExperimentConfig, train_ds: Dataset, test_ds: Dataset,
          on_batch: Callable[[BatchInfo], None] | None = None) -> TrainResult:
    K = train_ds.num_classes
    if test_ds.num_classes != K or test_ds.dim != train_ds.dim:
        raise InputError("train and test datasets disagree on K or feature width")
    q_soft = q_soft_table(cfg, K) if cfg.method == "kd" else None
    state = build_state(cfg, train_ds.dim, K)
    snap_epochs = set(cfg.resolved_snapshot_epochs())
    snapshots = {}
    X, Y = train_ds.features, train_ds.labels
    N = len(train_ds)
    bs = cfg.batch_size
    res_lr_ratio = 1.0
    if cfg.optimizer.residual_lr is not None:
        res_lr_ratio = cfg.optimizer.residual_lr / cfg.optimizer.lr

    for epoch in range(1, cfg.epochs + 1):
        state.epoch = epoch
        lr = state.schedule.rate(epoch)
        perm = state.rng.permutation(N)
        sums = np.zeros(5)
        S_used = None
        for bi, start in enumerate(range(0, N, bs)):
            idx = perm[start:start + bs]
            x, y = X[idx], Y[idx]
            z, cache = state.model.forward(x)
            acc = state.tracker.accuracy
            parts, grad_z, grad_S = _batch_objective(cfg, state, z, y, acc, q_soft)
            S_used = None if state.S is None else state.S.S.copy()
            if on_batch is not None:
                on_batch(BatchInfo(epoch, bi, y, z, acc, parts[4], grad_z, S_used))
            grads = state.model.backward(cache, grad_z)
            params = state.model.params()
            rates = [lr] * len(params)
            if state.S is not None:
                params.append(state.S.S)
                grads.append(grad_S)
                rates.append(lr * res_lr_ratio)
            state.optimizer.step(params, grads, rates)
            state.model.mark_updated()
            state.tracker.update(np.sum(np.argmax(z, axis=1) == y), len(y))
            sums += np.asarray(parts) * len(y)
        train_acc = state.tracker.end_epoch()
        test_acc, _ = evaluate(state.model, test_ds)
        means = sums / N
        if S_used is not None:
            used = ResidualCorrelationMatrix(S_used)
            entropy = float(np.mean(used.row_entropy()))
            if epoch in snap_epochs:
                snapshots[epoch] = used
        else:
            entropy = float("nan")
        state.history.append(EpochRecord(epoch, train_acc, test_acc, *means[:4], means[4], entropy))
    return TrainResult(state, state.history, snapshots, K)


def write_metrics(history, path) -> Path:
    path = Path(path)
    path.write_text(",".join(METRICS_HEADER) + "\n" + "".join(r.csv_row() + "\n" for r in history))
    return path
