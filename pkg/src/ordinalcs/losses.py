"""Classification losses with an additive cost-sensitive penalty.

Every loss consumes softmax probabilities and reports its gradient with
respect to the logits that produced them. With ``p = softmax(z)`` and a
loss ``f(p)``, the chain rule through the softmax Jacobian gives
``df/dz_k = p_k * (g_k - sum_j p_j g_j)`` where ``g = df/dp``; the closed
forms below are that expression simplified per loss.

Log arguments are clamped to ``[EPS, 1]``. The clamp guards the reported
value only: gradients are those of the unclamped loss, so a confidently
wrong prediction (``p_y < EPS``) still gets pushed toward its label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost_matrices import as_cost_matrix
from .errors import InvalidDimensionError, InvalidHyperparameterError, InvalidInputError

EPS = 1e-12

BASE_LOSSES = ("ce", "fl", "nuls")

__all__ = [
    "EPS",
    "BASE_LOSSES",
    "LossHyper",
    "LossValue",
    "softmax",
    "cross_entropy",
    "focal_loss",
    "gaussian_smooth_label",
    "smoothing_targets",
    "nuls_loss",
    "cs_penalty",
    "cs_regularized_loss",
    "loss_gradient",
    "composite_batch",
]


@dataclass(frozen=True)
class LossHyper:
    """Base-loss hyperparameters: focal ``alpha``/``gamma`` and NULS ``sigma``."""

    alpha: float = 1.0
    gamma: float = 2.0
    sigma: float = 1.0

    def validate(self, base: str) -> None:
        if base == "fl":
            _check_focal(self.alpha, self.gamma)
        elif base == "nuls":
            _check_sigma(self.sigma)


@dataclass
class LossValue:
    value: float
    gradient: np.ndarray | None = None


def _check_focal(alpha: float, gamma: float) -> None:
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidHyperparameterError(f"focal alpha must be > 0, got {alpha}")
    if not (math.isfinite(gamma) and gamma >= 0):
        raise InvalidHyperparameterError(f"focal gamma must be >= 0, got {gamma}")


def _check_sigma(sigma: float) -> None:
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidHyperparameterError(f"smoothing sigma must be > 0, got {sigma}")


def _check_base(base: str) -> str:
    base = str(base).lower()
    if base not in BASE_LOSSES:
        raise InvalidHyperparameterError(f"unknown base loss {base!r}; choose from {BASE_LOSSES}")
    return base


def _check_label(y, num_classes: int) -> int:
    if int(y) != y or not 0 <= int(y) < num_classes:
        raise InvalidInputError(f"label {y} outside [0, {num_classes})")
    return int(y)


def _as_prob(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidDimensionError(f"probability vector must be 1-D with >= 2 entries, got shape {arr.shape}")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1) or abs(arr.sum() - 1.0) > 1e-6:
        raise InvalidInputError("not a probability vector")
    return arr


def softmax(z) -> np.ndarray:
    """Max-shifted softmax over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits must be finite")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def gaussian_smooth_label(y: int, sigma: float, num_classes: int) -> np.ndarray:
    """Gaussian kernel centred on ``y``, truncated to the label range and renormalized."""
    _check_sigma(sigma)
    if num_classes < 2:
        raise InvalidDimensionError("need at least 2 classes")
    y = _check_label(y, num_classes)
    d = np.arange(num_classes) - y
    w = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return w / w.sum()


def smoothing_targets(num_classes: int, sigma: float) -> np.ndarray:
    """Row ``y`` holds ``gaussian_smooth_label(y, sigma, num_classes)``."""
    return np.stack([gaussian_smooth_label(y, sigma, num_classes) for y in range(num_classes)])


# -- batched core -----------------------------------------------------------


def _soft_ce_batch(P: np.ndarray, T: np.ndarray):
    logP = np.log(np.maximum(P, EPS))
    loss = -(T * logP).sum(axis=1)
    grad = P * T.sum(axis=1)[:, None] - T
    return loss, grad


def _focal_batch(P: np.ndarray, y: np.ndarray, alpha: float, gamma: float):
    n, c = P.shape
    rows = np.arange(n)
    q = P[rows, y]
    logq = np.log(np.maximum(q, EPS))
    om = 1.0 - q
    w = om**gamma
    loss = -alpha * w * logq
    # q * d/dq [(1-q)^gamma]; zero when gamma == 0 or q == 1
    dw = np.zeros_like(q)
    if gamma != 0.0:
        pos = om > 0
        dw[pos] = -gamma * q[pos] * om[pos] ** (gamma - 1.0)
    q_dfdq = -alpha * (w + dw * logq)
    onehot = np.zeros_like(P)
    onehot[rows, y] = 1.0
    grad = q_dfdq[:, None] * (onehot - P)
    return loss, grad


def composite_batch(Z, y, base: str, lam: float, M, hyper: LossHyper = LossHyper(), targets=None):
    """Per-row composite loss and logit gradient for a batch.

    ``Z`` is ``(n, C)`` logits, ``y`` length-``n`` integer labels. ``M`` may
    be ``None`` when ``lam == 0``. ``targets`` optionally supplies the
    ``(C, C)`` soft-target table (identity for CE, Gaussian rows for NULS).
    Returns ``(losses, grads)`` with shapes ``(n,)`` and ``(n, C)``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    P = softmax(Z)
    n, c = P.shape
    if base == "fl":
        loss, grad = _focal_batch(P, y, hyper.alpha, hyper.gamma)
    else:
        if targets is None:
            targets = np.eye(c) if base == "ce" else smoothing_targets(c, hyper.sigma)
        loss, grad = _soft_ce_batch(P, targets[y])
    if lam != 0.0:
        m = np.asarray(M, dtype=np.float64)[y]
        pen = (m * P).sum(axis=1)
        loss = loss + lam * pen
        grad = grad + lam * P * (m - pen[:, None])
    return loss, grad


# -- single-example API -----------------------------------------------------


def cross_entropy(p, target) -> LossValue:
    """``-sum(target * log p)``; ``target`` may be one-hot or any distribution."""
    p = _as_prob(p)
    t = np.asarray(target, dtype=np.float64)
    if t.shape != p.shape:
        raise InvalidDimensionError(f"target shape {t.shape} != prediction shape {p.shape}")
    loss, grad = _soft_ce_batch(p[None, :], t[None, :])
    return LossValue(float(loss[0]), grad[0])


def focal_loss(p, y: int, alpha: float = 1.0, gamma: float = 2.0) -> LossValue:
    """Focal loss ``-alpha (1 - p_y)**gamma log p_y`` for a hard label."""
    _check_focal(alpha, gamma)
    p = _as_prob(p)
    y = _check_label(y, p.size)
    loss, grad = _focal_batch(p[None, :], np.array([y]), alpha, gamma)
    return LossValue(float(loss[0]), grad[0])


def nuls_loss(p, y: int, sigma: float = 1.0) -> LossValue:
    """Cross-entropy against the Gaussian-smoothed label."""
    p = _as_prob(p)
    return cross_entropy(p, gaussian_smooth_label(y, sigma, p.size))


def cs_penalty(p, y: int, M) -> LossValue:
    """Expected cost ``<M[y, :], p>`` of the predicted distribution."""
    p = _as_prob(p)
    M = as_cost_matrix(M)
    if M.shape[0] != p.size:
        raise InvalidDimensionError(f"cost matrix is {M.shape[0]}x{M.shape[0]} but prediction has {p.size} classes")
    y = _check_label(y, p.size)
    m = M[y]
    pen = float(m @ p)
    return LossValue(pen, p * (m - pen))


def _prepare(base, z, y, lam, M, hyper):
    base = _check_base(base)
    if not (math.isfinite(lam) and lam >= 0):
        raise InvalidHyperparameterError(f"lambda must be >= 0, got {lam}")
    hyper.validate(base)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise InvalidDimensionError(f"logits must be 1-D with >= 2 entries, got shape {z.shape}")
    y = _check_label(y, z.size)
    if lam != 0.0:
        M = as_cost_matrix(M)
        if M.shape[0] != z.size:
            raise InvalidDimensionError(f"cost matrix is {M.shape[0]}x{M.shape[0]} but logits have {z.size} entries")
    return base, z, y, M


def cs_regularized_loss(base: str, z, y: int, lam: float, M, hyper: LossHyper = LossHyper()) -> LossValue:
    """Base loss plus ``lam`` times the cost-sensitive penalty, evaluated at ``softmax(z)``.

    With ``lam == 0`` the result is the base loss exactly and ``M`` is ignored.
    """
    base, z, y, M = _prepare(base, z, y, lam, M, hyper)
    loss, grad = composite_batch(z[None, :], np.array([y]), base, lam, M, hyper)
    return LossValue(float(loss[0]), grad[0])


def loss_gradient(base: str, z, y: int, lam: float, M, hyper: LossHyper = LossHyper()) -> np.ndarray:
    return cs_regularized_loss(base, z, y, lam, M, hyper).gradient
