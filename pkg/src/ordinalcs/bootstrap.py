"""Paired, stratified bootstrap comparison of two models on one test set."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyInputError, InvalidInputError, OrdinalCSError, UnstableStatisticError
from .metrics import METRICS, PredictionSet

__all__ = ["BootstrapResult", "stratified_resample", "paired_bootstrap_test", "resample_rng"]


@dataclass
class BootstrapResult:
    metric_name: str
    n_resamples: int
    observed_diff: float
    diffs: list[float]
    p_value: float
    ci95: tuple[float, float]
    alpha: float
    significant: bool
    n_requested: int = 0
    n_undefined: int = 0
    seed: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def resample_rng(seed: int, k: int) -> np.random.Generator:
    """Independent generator for resample ``k``; order of evaluation is irrelevant."""
    return np.random.default_rng([int(seed), int(k)])


def stratified_resample(labels, seed) -> np.ndarray:
    """Draw, per grade, as many indices as that grade has, with replacement, from its own positions.

    ``seed`` may be an int or a ``numpy.random.Generator``. Output is grouped by
    grade in ascending order; within a grade the draw order is random.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInputError("cannot resample an empty label sequence")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = np.empty(labels.size, dtype=np.intp)
    pos = 0
    for g in np.unique(labels):
        members = np.flatnonzero(labels == g)
        out[pos : pos + members.size] = members[rng.integers(0, members.size, size=members.size)]
        pos += members.size
    return out


def _metric_or_none(fn, preds):
    try:
        return fn(preds)
    except OrdinalCSError:
        return None


def paired_bootstrap_test(
    truths,
    probs_a,
    probs_b,
    metric: str = "quad_kappa",
    n: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    workers: int = 1,
) -> BootstrapResult:
    """Bootstrap the difference ``metric(A) - metric(B)``.

    Each resample applies one stratified index set to both models. The
    two-sided p-value is ``2 * min(#{d <= 0}, #{d >= 0}) / n_valid`` clipped
    to 1. Resamples where the metric is undefined are dropped and counted;
    more than half undefined raises :class:`UnstableStatisticError`.
    """
    if metric not in METRICS:
        raise InvalidInputError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    if n < 1:
        raise InvalidInputError("need at least one resample")
    truths = np.asarray(truths, dtype=np.intp)
    probs_a = np.asarray(probs_a, dtype=np.float64)
    probs_b = np.asarray(probs_b, dtype=np.float64)
    if not (truths.shape[0] == probs_a.shape[0] == probs_b.shape[0]) or probs_a.shape != probs_b.shape:
        raise InvalidInputError("truths and both probability arrays must be aligned")
    fn = METRICS[metric]
    full_a = PredictionSet(truths, probs_a)
    full_b = PredictionSet(truths, probs_b)
    observed = fn(full_a) - fn(full_b)

    def one(k: int):
        idx = stratified_resample(truths, resample_rng(seed, k))
        a = _metric_or_none(fn, full_a.subset(idx))
        b = _metric_or_none(fn, full_b.subset(idx))
        if a is None or b is None:
            return None
        return a - b

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            raw = list(ex.map(one, range(n)))
    else:
        raw = [one(k) for k in range(n)]

    diffs = [d for d in raw if d is not None]
    n_undef = n - len(diffs)
    if n_undef * 2 > n:
        raise UnstableStatisticError(f"{metric} undefined in {n_undef} of {n} resamples")
    arr = np.asarray(diffs)
    p = 2.0 * min(int((arr <= 0).sum()), int((arr >= 0).sum())) / arr.size
    p = min(1.0, p)
    lo, hi = np.percentile(arr, [2.5, 97.5])
    return BootstrapResult(
        metric_name=metric,
        n_resamples=len(diffs),
        observed_diff=float(observed),
        diffs=[float(d) for d in diffs],
        p_value=float(p),
        ci95=(float(lo), float(hi)),
        alpha=alpha,
        significant=bool(p < alpha),
        n_requested=n,
        n_undefined=n_undef,
        seed=seed,
    )
