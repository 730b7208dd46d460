"""Ordinal evaluation metrics: confusion, quadratic kappa, ACA, Kendall tau-b, Hand-Till mAUC."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, InvalidDimensionError, InvalidInputError, UndefinedStatisticError

__all__ = [
    "PredictionSet",
    "MetricsReport",
    "confusion_matrix",
    "quadratic_weighted_kappa",
    "aca",
    "absent_classes",
    "kendall_tau",
    "kendall_tau_b",
    "mauc_pairwise",
    "hand_till_mauc",
    "normalized_confusion_percent",
    "evaluate",
    "METRICS",
]


@dataclass
class PredictionSet:
    """True grades with the predicted class distribution for each item.

    The hard prediction is the argmax of ``probs``; ties go to the lower grade.
    """

    truths: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.truths = np.asarray(self.truths, dtype=np.intp)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.truths.ndim != 1:
            raise InvalidDimensionError("truths must be 1-D and probs 2-D")
        if self.probs.shape[0] != self.truths.shape[0]:
            raise InvalidDimensionError(
                f"{self.truths.shape[0]} labels but {self.probs.shape[0]} probability rows"
            )
        if self.probs.shape[1] < 2:
            raise InvalidDimensionError("need at least 2 classes")
        if self.truths.size and (self.truths.min() < 0 or self.truths.max() >= self.num_classes):
            raise InvalidInputError(f"labels outside [0, {self.num_classes})")

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    @property
    def predicted(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)

    def __len__(self) -> int:
        return self.truths.shape[0]

    def subset(self, idx) -> "PredictionSet":
        return PredictionSet(self.truths[idx], self.probs[idx])

    @classmethod
    def from_hard(cls, truths, predicted, num_classes: int) -> "PredictionSet":
        """One-hot probabilities for hard predictions."""
        predicted = np.asarray(predicted, dtype=np.intp)
        probs = np.zeros((predicted.size, num_classes))
        probs[np.arange(predicted.size), predicted] = 1.0
        return cls(truths, probs)


def confusion_matrix(preds: PredictionSet) -> np.ndarray:
    """Counts ``(i, j)`` of items with true grade ``i`` predicted as ``j``."""
    if len(preds) == 0:
        raise EmptyInputError("cannot build a confusion matrix from zero predictions")
    c = preds.num_classes
    flat = np.bincount(preds.truths * c + preds.predicted, minlength=c * c)
    return flat.reshape(c, c).astype(np.int64)


def _counts(m) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidDimensionError(f"confusion matrix must be square, got shape {arr.shape}")
    if arr.sum() <= 0:
        raise EmptyInputError("confusion matrix has zero total count")
    return arr


def quadratic_weighted_kappa(m) -> float:
    """Cohen's kappa with weights ``(i - j)**2 / (C - 1)**2``.

    Returns 1.0 when observed and expected weighted disagreement are both zero.
    """
    O = _counts(m).astype(np.float64)
    c = O.shape[0]
    total = O.sum()
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / total
    idx = np.arange(c)
    W = (idx[:, None] - idx[None, :]) ** 2 / float((c - 1) ** 2)
    num = float((W * O).sum())
    den = float((W * E).sum())
    if den == 0.0:
        return 1.0
    return 1.0 - num / den


def absent_classes(m) -> list[int]:
    """True grades with no items; these are left out of ACA."""
    rows = _counts(m).sum(axis=1)
    return [int(i) for i in np.flatnonzero(rows == 0)]


def aca(m) -> float:
    """Mean per-class recall over the true grades present in ``m``."""
    arr = _counts(m).astype(np.float64)
    rows = arr.sum(axis=1)
    present = rows > 0
    return float(np.mean(np.diag(arr)[present] / rows[present]))


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall tau between two discrete sequences.

    Pair counts come from the contingency table, so the cost is
    ``O(n + k_x * k_y)`` rather than ``O(n**2)``.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidDimensionError("kendall tau needs two aligned 1-D sequences")
    n = x.size
    if n < 2:
        raise UndefinedStatisticError("kendall tau needs at least 2 items")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    kx, ky = xi.max() + 1, yi.max() + 1
    table = np.bincount(xi * ky + yi, minlength=kx * ky).reshape(kx, ky).astype(np.int64)
    # below_right[i, j] = items with x > i and y > j; below_left: x > i and y < j
    cum = table[::-1, :].cumsum(axis=0)[::-1, :]
    strictly_below = np.zeros_like(cum)
    strictly_below[:-1] = cum[1:]
    right = strictly_below[:, ::-1].cumsum(axis=1)[:, ::-1]
    below_right = np.zeros_like(right)
    below_right[:, :-1] = right[:, 1:]
    left = strictly_below.cumsum(axis=1)
    below_left = np.zeros_like(left)
    below_left[:, 1:] = left[:, :-1]
    concordant = int((table * below_right).sum())
    discordant = int((table * below_left).sum())
    n0 = n * (n - 1) // 2
    rx = table.sum(axis=1)
    ry = table.sum(axis=0)
    tx = int((rx * (rx - 1) // 2).sum())
    ty = int((ry * (ry - 1) // 2).sum())
    if n0 == tx or n0 == ty:
        raise UndefinedStatisticError("kendall tau is undefined for a constant sequence")
    return (concordant - discordant) / math.sqrt((n0 - tx) * (n0 - ty))


def kendall_tau(preds: PredictionSet) -> float:
    """Kendall tau-b between true grades and argmax predictions."""
    return kendall_tau_b(preds.truths, preds.predicted)


def _auc_given(pos: np.ndarray, neg: np.ndarray) -> float:
    """P(score of a positive > score of a negative), ties counted 1/2."""
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    wins = 2 * below.sum() + (upto - below).sum()
    return float(wins) / (2.0 * pos.size * neg.size)


def mauc_pairwise(preds: PredictionSet) -> tuple[dict[tuple[int, int], float], list[tuple[int, int]]]:
    """Pairwise ``A_hat(i, j)`` for every class pair, plus the pairs skipped for absence."""
    counts = np.bincount(preds.truths, minlength=preds.num_classes)
    pairs: dict[tuple[int, int], float] = {}
    skipped: list[tuple[int, int]] = []
    masks = [preds.truths == k for k in range(preds.num_classes)]
    for i in range(preds.num_classes):
        for j in range(i + 1, preds.num_classes):
            if counts[i] == 0 or counts[j] == 0:
                skipped.append((i, j))
                continue
            s_i = preds.probs[:, i]
            s_j = preds.probs[:, j]
            a_ij = _auc_given(s_i[masks[i]], s_i[masks[j]])
            a_ji = _auc_given(s_j[masks[j]], s_j[masks[i]])
            pairs[(i, j)] = (a_ij + a_ji) / 2.0
    return pairs, skipped


def hand_till_mauc(preds: PredictionSet) -> float:
    """Hand and Till's multi-class AUC over the classes present in ``preds``."""
    if len(preds) == 0:
        raise EmptyInputError("no predictions")
    pairs, _ = mauc_pairwise(preds)
    if not pairs:
        raise UndefinedStatisticError("mAUC needs at least 2 classes present")
    return float(np.mean(list(pairs.values())))


def normalized_confusion_percent(m) -> np.ndarray:
    """Row-normalized confusion as integer percentages; empty rows stay zero."""
    arr = np.asarray(m, dtype=np.float64)
    rows = arr.sum(axis=1, keepdims=True)
    out = np.divide(100.0 * arr, rows, out=np.zeros_like(arr), where=rows > 0)
    return np.rint(out).astype(np.int64)


def _kappa(p: PredictionSet) -> float:
    return quadratic_weighted_kappa(confusion_matrix(p))


def _aca(p: PredictionSet) -> float:
    return aca(confusion_matrix(p))


METRICS = {
    "quad_kappa": _kappa,
    "mauc": hand_till_mauc,
    "aca": _aca,
    "kendall_tau": kendall_tau,
}


@dataclass
class MetricsReport:
    quad_kappa: float
    mauc: float | None
    aca: float
    kendall_tau: float | None
    confusion: np.ndarray
    absent_classes: list[int] = field(default_factory=list)
    skipped_auc_pairs: list[tuple[int, int]] = field(default_factory=list)
    undefined: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "quad_kappa": self.quad_kappa,
            "mauc": self.mauc,
            "aca": self.aca,
            "kendall_tau": self.kendall_tau,
            "confusion": self.confusion.tolist(),
            "confusion_percent": normalized_confusion_percent(self.confusion).tolist(),
            "absent_classes": self.absent_classes,
            "skipped_auc_pairs": [list(p) for p in self.skipped_auc_pairs],
            "undefined": self.undefined,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate(preds: PredictionSet) -> MetricsReport:
    """All four metrics; undefined statistics are reported as ``None`` and listed."""
    conf = confusion_matrix(preds)
    undefined = []
    try:
        tau = kendall_tau(preds)
    except UndefinedStatisticError:
        tau = None
        undefined.append("kendall_tau")
    pairs, skipped = mauc_pairwise(preds)
    if pairs:
        mauc = float(np.mean(list(pairs.values())))
    else:
        mauc = None
        undefined.append("mauc")
    return MetricsReport(
        quad_kappa=quadratic_weighted_kappa(conf),
        mauc=mauc,
        aca=aca(conf),
        kendall_tau=tau,
        confusion=conf,
        absent_classes=absent_classes(conf),
        skipped_auc_pairs=skipped,
        undefined=undefined,
    )
