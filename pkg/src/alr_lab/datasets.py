"""Seeded synthetic Gaussian-mixture data and a CSV loader.

CSV layout: one sample per line, ``d`` feature columns followed by one
integer label column (zero-based). An optional header line is skipped when
``has_header`` is set.

Synthetic draws use ``RngStream(seed).substream(0)`` for the train split and
``substream(1)`` for the test split. Within a split, classes are drawn in
index order; each class draws ``n * d`` normals filled row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError, ParseError
from .numeric import RngStream


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise InputError(f"features must be a non-empty N x d matrix, got shape {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise InputError(f"expected {feats.shape[0]} labels, got shape {labels.shape}")
        if not np.all(np.isfinite(feats)):
            raise InputError("features contain NaN or Inf")
        if self.num_classes < 2:
            raise InputError(f"need at least 2 classes, got K={self.num_classes}")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise InputError(f"labels must lie in [0, {self.num_classes})")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def with_num_classes(self, num_classes: int) -> "Dataset":
        return Dataset(self.features, self.labels, num_classes, self.split)


@dataclass(frozen=True)
class SynthSpec:
    means: tuple
    stds: tuple
    n_train: int
    n_test: int
    seed: int = 0
    name: str = field(default="synth", compare=False)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] < 2 or means.shape[1] < 1:
            raise ParameterError(f"means must be a K x d matrix with K >= 2, got shape {means.shape}")
        stds = np.broadcast_to(np.asarray(self.stds, dtype=np.float64), (means.shape[0],))
        if not np.all(stds > 0):
            raise ParameterError("every class std must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise ParameterError("samples per class must be at least 1 for both splits")
        object.__setattr__(self, "means", tuple(map(tuple, means.tolist())))
        object.__setattr__(self, "stds", tuple(stds.tolist()))

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return len(self.means[0])


def _draw(spec: SynthSpec, stream: RngStream, n: int, split: str) -> Dataset:
    feats, labels = [], []
    for k, (mean, std) in enumerate(zip(spec.means, spec.stds)):
        noise = stream.gaussian(n * spec.dim).reshape(n, spec.dim)
        feats.append(np.asarray(mean) + std * noise)
        labels.append(np.full(n, k))
    return Dataset(np.vstack(feats), np.concatenate(labels), spec.num_classes, split)


def generate(spec: SynthSpec) -> tuple[Dataset, Dataset]:
    root = RngStream(spec.seed)
    train = _draw(spec, root.substream(0), spec.n_train, "train")
    test = _draw(spec, root.substream(1), spec.n_test, "test")
    return train, test


def separable_spec(seed: int = 0) -> SynthSpec:
    # 5 sigma from the decision boundary on each side.
    return SynthSpec(means=((5.0, 0.0), (-5.0, 0.0)), stds=(1.0, 1.0),
                     n_train=100, n_test=500, seed=seed, name="separable")


def confusable_spec(seed: int = 0) -> SynthSpec:
    return SynthSpec(means=((0.0, 0.0), (0.5, 0.0), (10.0, 10.0), (-10.0, 10.0)),
                     stds=(1.0, 1.0, 1.0, 1.0), n_train=500, n_test=200, seed=seed,
                     name="confusable")


PRESETS = {"separable": separable_spec, "confusable": confusable_spec}


def separable_preset(seed: int = 0) -> tuple[Dataset, Dataset]:
    return generate(separable_spec(seed))


def confusable_preset(seed: int = 0) -> tuple[Dataset, Dataset]:
    return generate(confusable_spec(seed))


def preset(name: str, seed: int = 0) -> tuple[Dataset, Dataset]:
    try:
        return generate(PRESETS[name](seed))
    except KeyError:
        raise ParameterError(f"unknown dataset preset {name!r}; choose from {sorted(PRESETS)}") from None


def write_csv(dataset: Dataset, path, header: bool = False) -> Path:
    path = Path(path)
    lines = []
    if header:
        lines.append(",".join([f"x{i}" for i in range(dataset.dim)] + ["label"]))
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(",".join([repr(float(v)) for v in row] + [str(int(label))]))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_csv(path, has_header: bool = False, num_classes: int | None = None,
             split: str = "train") -> Dataset:
    """Read a dataset; K is ``max(label) + 1`` unless ``num_classes`` is given."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    lines = text.splitlines()
    start = 1 if has_header else 0
    feats, labels = [], []
    width = None
    for lineno in range(start + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) < 2:
            raise ParseError("need at least one feature column and a label column", lineno, path)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", lineno, path)
        try:
            row = [float(c) for c in cells[:-1]]
        except ValueError:
            raise ParseError(f"non-numeric feature cell in {cells[:-1]}", lineno, path) from None
        if not all(np.isfinite(row)):
            raise ParseError("non-finite feature value", lineno, path)
        try:
            label = int(cells[-1])
        except ValueError:
            raise ParseError(f"label {cells[-1]!r} is not an integer", lineno, path) from None
        if label < 0:
            raise ParseError(f"negative label {label}", lineno, path)
        feats.append(row)
        labels.append(label)
    if not feats:
        raise InputError(f"{path}: no data rows")
    K = max(labels) + 1 if num_classes is None else num_classes
    if max(labels) >= K:
        raise InputError(f"{path}: label {max(labels)} does not fit num_classes={K}")
    return Dataset(np.array(feats), np.array(labels), max(K, 2), split)
