"""Dataset CSV I/O, synthetic ordinal data and confusion-driven label noise."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDimensionError, InvalidInputError, ParseError

__all__ = [
    "DEFAULT_PRIORS",
    "Dataset",
    "SynthSpec",
    "load_csv",
    "save_csv",
    "gen_synthetic",
    "inject_label_noise",
]

# Imbalanced, DR-like grade frequencies.
DEFAULT_PRIORS = (0.73, 0.07, 0.15, 0.03, 0.02)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    clean_labels: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise InvalidDimensionError("features must be (N, D) with one label per row")
        if self.labels.size == 0:
            raise InvalidInputError("dataset is empty")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InvalidInputError(f"labels outside [0, {self.num_classes})")
        if self.clean_labels is not None:
            self.clean_labels = np.ascontiguousarray(self.clean_labels, dtype=np.intp)
            if self.clean_labels.shape != self.labels.shape:
                raise InvalidDimensionError("clean_labels must align with labels")

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.num_classes).tolist()


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Header ``f0..f{D-1},label[,clean_label]``; floats with 17 significant digits."""
    header = [f"f{j}" for j in range(ds.dim)] + ["label"]
    if ds.clean_labels is not None:
        header.append("clean_label")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [format(v, ".17g") for v in ds.features[i]] + [int(ds.labels[i])]
            if ds.clean_labels is not None:
                row.append(int(ds.clean_labels[i]))
            w.writerow(row)


def _parse_label(cell: str, line: int, col: str) -> int:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric {col} {cell!r}", line) from None
    if not math.isfinite(v) or v != int(v):
        raise ParseError(f"{col} {cell!r} is not an integer", line)
    if v < 0:
        raise ParseError(f"negative {col} {cell!r}", line)
    return int(v)


def load_csv(path: str | Path, num_classes: int | None = None) -> Dataset:
    """Parse a dataset CSV. ``num_classes`` defaults to max label + 1."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    if "label" not in header:
        raise ParseError("header has no 'label' column", 1)
    feat_cols = [i for i, h in enumerate(header) if h.startswith("f") and h[1:].isdigit()]
    expected = [f"f{j}" for j in range(len(feat_cols))]
    if [header[i] for i in feat_cols] != expected or not feat_cols:
        raise ParseError("feature columns must be named f0..f{D-1}", 1)
    label_col = header.index("label")
    clean_col = header.index("clean_label") if "clean_label" in header else None
    feats, labels, clean = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", lineno)
        try:
            feats.append([float(row[i]) for i in feat_cols])
        except ValueError as exc:
            raise ParseError(f"non-numeric feature ({exc})", lineno) from None
        labels.append(_parse_label(row[label_col], lineno, "label"))
        if clean_col is not None:
            clean.append(_parse_label(row[clean_col], lineno, "clean_label"))
    if not labels:
        raise ParseError("no data rows", 2)
    C = num_classes if num_classes is not None else max(labels + clean) + 1
    return Dataset(
        np.array(feats),
        np.array(labels),
        int(C),
        clean_labels=np.array(clean) if clean_col is not None else None,
        provenance=f"csv:{path}",
    )


@dataclass
class SynthSpec:
    """Gaussian classes around evenly spaced, collinear centres.

    Grade ``g`` is centred at ``g * spacing`` along the unit diagonal
    ``(1, ..., 1) / sqrt(D)``, so adjacent grades overlap more than distant
    ones. The direction does not depend on the seed, so datasets drawn with
    different seeds share one geometry.
    """

    num_classes: int = 5
    samples: int = 1000
    priors: tuple[float, ...] = DEFAULT_PRIORS
    input_dim: int = 2
    spacing: float = 1.0
    spread: float = 1.0
    noise_matrix: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0

    def validate(self) -> None:
        pri = np.asarray(self.priors, dtype=np.float64)
        if self.num_classes < 2:
            raise InvalidDimensionError("need at least 2 classes")
        if pri.shape != (self.num_classes,):
            raise InvalidDimensionError(f"{pri.size} priors for {self.num_classes} classes")
        if np.any(pri < 0) or abs(pri.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"priors must be a probability vector (sum={pri.sum():.6g})")
        if self.samples < 1 or self.input_dim < 1:
            raise InvalidInputError("samples and input_dim must be >= 1")
        if not (self.spacing > 0 and self.spread > 0):
            raise InvalidInputError("spacing and spread must be > 0")
        if self.noise_matrix is not None:
            _check_stochastic(self.noise_matrix, self.num_classes)


def _check_stochastic(m, num_classes: int) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape != (num_classes, num_classes):
        raise InvalidDimensionError(f"noise matrix shape {arr.shape} does not match {num_classes} classes")
    if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidInputError("noise matrix rows must be probability vectors")
    return arr


def gen_synthetic(spec: SynthSpec) -> Dataset:
    """Sample a dataset; with a noise matrix, ``labels`` are noisy and ``clean_labels`` kept."""
    spec.validate()
    rng = np.random.default_rng([int(spec.seed), 7])
    direction = np.full(spec.input_dim, 1.0 / math.sqrt(spec.input_dim))
    clean = rng.choice(spec.num_classes, size=spec.samples, p=np.asarray(spec.priors, dtype=np.float64))
    centres = np.arange(spec.num_classes)[:, None] * spec.spacing * direction[None, :]
    X = centres[clean] + spec.spread * rng.standard_normal((spec.samples, spec.input_dim))
    if spec.noise_matrix is None:
        return Dataset(X, clean, spec.num_classes, provenance=f"synthetic:seed={spec.seed}")
    noisy = inject_label_noise(clean, spec.noise_matrix, rng)
    return Dataset(X, noisy, spec.num_classes, clean_labels=clean, provenance=f"synthetic+noise:seed={spec.seed}")


def inject_label_noise(labels, m_star, seed) -> np.ndarray:
    """Replace each label ``i`` by a draw from row ``i`` of ``m_star``."""
    labels = np.asarray(labels, dtype=np.intp)
    arr = np.asarray(m_star, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidDimensionError("noise matrix must be square")
    arr = _check_stochastic(arr, arr.shape[0])
    if labels.size and (labels.min() < 0 or labels.max() >= arr.shape[0]):
        raise InvalidDimensionError(f"labels outside the {arr.shape[0]}-class noise matrix")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(arr, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(labels.size)
    out = (u[:, None] >= cdf[labels]).sum(axis=1)
    return np.minimum(out, arr.shape[0] - 1).astype(np.intp)
