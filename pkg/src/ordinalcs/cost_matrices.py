"""Cost matrices for the cost-sensitive regularizer.

Three constructions are provided:

* ``quadratic_cost_matrix`` -- squared grade distance, ``(i - j)**2``.
* ``row_normalize`` -- turns inter-observer confusion counts into the
  row-stochastic matrix of atomic sub-task probabilities ``P(j | i)``.
* ``ast_cost_matrix`` -- the average of the quadratic cost and
  ``I - P``, which lowers the penalty on confusions annotators also make.

Matrices are plain ``numpy`` arrays; rows index the true grade.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import InvalidDimensionError, InvalidInputError, ZeroRowError

__all__ = [
    "OPHTHALMOLOGIST_COUNTS",
    "as_confusion_counts",
    "as_cost_matrix",
    "quadratic_cost_matrix",
    "row_normalize",
    "ast_cost_matrix",
    "matrix_to_csv",
    "matrix_from_csv",
    "matrix_to_json",
    "matrix_from_json",
]

# Retinal specialists vs. adjudicated consensus, 5 DR grades (rows = true grade).
OPHTHALMOLOGIST_COUNTS = np.array(
    [
        [1469, 4, 5, 0, 0],
        [58, 62, 5, 0, 0],
        [22, 3, 118, 1, 0],
        [0, 0, 13, 36, 1],
        [0, 0, 0, 1, 15],
    ],
    dtype=np.int64,
)


def as_confusion_counts(m) -> np.ndarray:
    """Validate and return a square non-negative integer count matrix."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
        raise InvalidDimensionError(f"confusion counts must be CxC with C >= 2, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InvalidInputError("confusion counts must be integral")
    elif arr.dtype.kind not in "iub":
        raise InvalidInputError(f"confusion counts must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise InvalidInputError("confusion counts must be non-negative")
    return arr


def as_cost_matrix(m) -> np.ndarray:
    """Validate and return a square, finite, entrywise non-negative cost matrix."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
        raise InvalidDimensionError(f"cost matrix must be CxC with C >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("cost matrix entries must be finite")
    if np.any(arr < 0):
        raise InvalidInputError("cost matrix entries must be non-negative")
    return arr


def quadratic_cost_matrix(num_classes: int) -> np.ndarray:
    """Ground cost ``M[i, j] = (i - j)**2`` for ``num_classes`` ordered grades."""
    if int(num_classes) != num_classes or num_classes < 2:
        raise InvalidDimensionError(f"need at least 2 classes, got {num_classes}")
    idx = np.arange(int(num_classes))
    return ((idx[:, None] - idx[None, :]) ** 2).astype(np.float64)


def row_normalize(counts) -> np.ndarray:
    """Row-normalize confusion counts into ``P(assigned j | true i)``.

    Row sums are taken in exact integer arithmetic and each entry is
    produced by a single division. A row with no items raises
    :class:`ZeroRowError` naming the grade; such rows are never imputed.
    """
    arr = as_confusion_counts(counts)
    sums = arr.sum(axis=1)
    zero = np.flatnonzero(sums == 0)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    return arr / sums[:, None]


def ast_cost_matrix(counts) -> np.ndarray:
    """Atomic sub-task cost ``(Q + I - P) / 2``.

    ``Q`` is the quadratic ground cost, ``I`` the identity and ``P`` the
    row-normalized confusion counts. Entries are non-negative because
    ``P[i, j] <= 1 <= Q[i, j]`` off the diagonal. The diagonal is the row
    minimum exactly when ``P[i, i] >= P[i, i +/- 1]``; entries two or more
    grades away cost at least 1.5.
    """
    probs = row_normalize(counts)
    c = probs.shape[0]
    return (quadratic_cost_matrix(c) + np.eye(c) - probs) / 2.0


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2**53:
        return str(int(x))
    return format(float(x), ".17g")


def matrix_to_csv(m, path: str | Path | None = None) -> str:
    """Headerless comma-separated rows; 17 significant digits for non-integers."""
    arr = np.asarray(m)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in arr:
        writer.writerow(_fmt(v) for v in row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def matrix_from_csv(source: str | Path) -> np.ndarray:
    """Read a headerless numeric CSV matrix from a path (or CSV text containing a newline)."""
    if isinstance(source, Path) or "\n" not in str(source):
        text = Path(source).read_text()
    else:
        text = str(source)
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise InvalidInputError(f"line {lineno}: non-numeric matrix cell ({exc})") from None
    if not rows:
        raise InvalidInputError("empty matrix CSV")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise InvalidInputError(f"row {i}: expected {width} columns, got {len(r)}")
    return np.array(rows, dtype=np.float64)


def matrix_to_json(m) -> str:
    arr = np.asarray(m)
    rows = [[int(v) if arr.dtype.kind in "iub" else float(v) for v in row] for row in arr]
    return json.dumps({"num_classes": int(arr.shape[0]), "matrix": rows})


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    arr = np.array(obj["matrix"], dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != obj["num_classes"]:
        raise InvalidDimensionError("matrix shape does not match num_classes")
    return arr
