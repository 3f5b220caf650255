"""The learnable residual correlation matrix and its residual labels.

``S`` has shape ``K x (K-1)``. Row ``k`` holds logits over the classes other
than ``k``; column ``j`` of row ``k`` refers to class ``j`` if ``j < k`` else
``j + 1`` (see ``labels.residual_to_class``). The residual label of class
``k`` is ``softmax(S[k])``.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import labels as lab
from .errors import DimensionError
from .numeric import as_matrix, entropy, softmax


class ResidualCorrelationMatrix:
    def __init__(self, S):
        S = as_matrix(S, "S")
        K = S.shape[0]
        if K < 2 or S.shape != (K, K - 1):
            raise DimensionError(f"S must have shape (K, K-1) with K >= 2, got {S.shape}")
        self.S = S

    @classmethod
    def init_uniform(cls, num_classes: int) -> "ResidualCorrelationMatrix":
        """All-zero logits, so every residual label starts uniform."""
        if num_classes < 2:
            raise DimensionError(f"need at least 2 classes, got K={num_classes}")
        return cls(np.zeros((num_classes, num_classes - 1)))

    @property
    def num_classes(self) -> int:
        return self.S.shape[0]

    @property
    def num_params(self) -> int:
        return self.S.size

    def copy(self) -> "ResidualCorrelationMatrix":
        return ResidualCorrelationMatrix(self.S.copy())

    def residual_label(self, k: int) -> np.ndarray:
        k = lab.check_class(k, self.num_classes)
        return softmax(self.S[k])

    def residual_labels(self, labels=None) -> np.ndarray:
        """Residual labels for a batch of classes (all rows when ``labels`` is None)."""
        probs = softmax(self.S, axis=1)
        return probs if labels is None else probs[np.asarray(labels)]

    def upd_gradient(self, p_res_detached, k: int, scale: float = 1.0) -> np.ndarray:
        """Gradient of the update loss on row ``k``: ``scale * (q_res - p_res)``.

        Returns a full ``K x (K-1)`` array that is zero outside row ``k``.
        """
        p = np.asarray(p_res_detached, dtype=np.float64)
        if p.shape != (self.num_classes - 1,):
            raise DimensionError(
                f"residual probabilities must have length {self.num_classes - 1}, got {p.shape}")
        grad = np.zeros_like(self.S)
        grad[k] = scale * (self.residual_label(k) - p)
        return grad

    def row_entropy(self) -> np.ndarray:
        return row_entropy(self.S)

    def full_matrix(self) -> np.ndarray:
        """K x K row-stochastic view with an exact zero diagonal."""
        probs = self.residual_labels()
        return np.stack([lab.unerase(probs[k], k, 0.0) for k in range(self.num_classes)])

    def export_rows(self, path, format: str = "csv", mapping: str = "residual") -> Path:
        return export_rows(self, path, format=format, mapping=mapping)


def init_uniform(num_classes: int) -> ResidualCorrelationMatrix:
    return ResidualCorrelationMatrix.init_uniform(num_classes)


def row_entropy(S) -> np.ndarray:
    """Entropy in nats of each row's softmax; bounded by ``ln(K-1)``."""
    S = np.asarray(S, dtype=np.float64)
    return entropy(softmax(S, axis=1), axis=1)


def _rows(matrix: ResidualCorrelationMatrix, mapping: str) -> np.ndarray:
    if mapping == "residual":
        return matrix.residual_labels()
    if mapping == "full-K":
        return matrix.full_matrix()
    raise ValueError(f"unknown mapping {mapping!r}; expected 'residual' or 'full-K'")


def format_row(values, digits: int = 9) -> str:
    return ",".join(f"{v:.{digits}g}" for v in values)


def export_rows(matrix: ResidualCorrelationMatrix, path, format: str = "csv",
                mapping: str = "residual") -> Path:
    """Write the softmax rows of S as CSV (9 significant digits) or binary PGM.

    PGM pixels are ``floor(255 * p + 0.5)``, row-major, maxval 255.
    """
    path = Path(path)
    rows = _rows(matrix, mapping)
    try:
        if format == "csv":
            text = "".join(format_row(r) + "\n" for r in rows)
            path.write_text(text)
        elif format == "pgm":
            pixels = np.floor(255.0 * rows + 0.5).clip(0, 255).astype(np.uint8)
            height, width = pixels.shape
            with open(path, "wb") as fh:
                fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
                fh.write(pixels.tobytes())
        else:
            raise ValueError(f"unknown export format {format!r}; expected 'csv' or 'pgm'")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}", os.fspath(path)) from exc
    return path


def save_logits(matrix: ResidualCorrelationMatrix, path) -> Path:
    """Raw S at full precision (round-trips exactly through ``load_logits``)."""
    path = Path(path)
    path.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in matrix.S))
    return path


def load_logits(path) -> ResidualCorrelationMatrix:
    rows = [[float(x) for x in line.split(",")]
            for line in Path(path).read_text().splitlines() if line.strip()]
    return ResidualCorrelationMatrix(np.array(rows))


def read_pgm(path) -> np.ndarray:
    """Minimal reader for the P5 files written above."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)
