"""Pure numpy implementation of the training kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is unavailable or ``ORDINALCS_PURE_PYTHON`` is set.
"""

import numpy as np

from .losses import LossHyper, composite_batch

_BASE = {0: "ce", 1: "fl"}


def loss_grad_batch(Z, y, base_code, lam, M, targets, alpha, gamma):
    Z = np.asarray(Z, dtype=np.float64)
    if not np.all(np.isfinite(Z)):
        n = Z.shape[0]
        return np.full(n, np.nan), np.full_like(Z, np.nan)
    return composite_batch(
        Z, y, _BASE[base_code], lam, M, LossHyper(alpha=alpha, gamma=gamma), targets=targets
    )


# divergence is detected from the losses, so overflow warnings are noise
@np.errstate(over="ignore", invalid="ignore")
def sgd_epoch_linear(W, b, X, y, order, batch_size, lr, base_code, lam, M, targets, alpha, gamma):
    """One pass of minibatch SGD over ``order``; updates ``W`` and ``b`` in place.

    Returns ``(mean_loss, bad_batch)`` where ``bad_batch`` is the index of the
    first batch with a non-finite loss (parameters untouched from then on) or -1.
    """
    total = 0.0
    n = len(order)
    for bi, start in enumerate(range(0, n, batch_size)):
        idx = order[start : start + batch_size]
        Xb = X[idx]
        Z = Xb @ W.T + b
        losses, G = loss_grad_batch(Z, y[idx], base_code, lam, M, targets, alpha, gamma)
        if not np.all(np.isfinite(losses)):
            return total / max(start, 1), bi
        total += losses.sum()
        G /= len(idx)
        W -= lr * (G.T @ Xb)
        b -= lr * G.sum(axis=0)
    return total / n, -1


@np.errstate(over="ignore", invalid="ignore")
def sgd_epoch_mlp(W1, b1, W2, b2, X, y, order, batch_size, lr, base_code, lam, M, targets, alpha, gamma):
    """As :func:`sgd_epoch_linear` for ``z = W2 relu(W1 x + b1) + b2``."""
    total = 0.0
    n = len(order)
    for bi, start in enumerate(range(0, n, batch_size)):
        idx = order[start : start + batch_size]
        Xb = X[idx]
        Hpre = Xb @ W1.T + b1
        H = np.maximum(Hpre, 0.0)
        Z = H @ W2.T + b2
        losses, G = loss_grad_batch(Z, y[idx], base_code, lam, M, targets, alpha, gamma)
        if not np.all(np.isfinite(losses)):
            return total / max(start, 1), bi
        total += losses.sum()
        G /= len(idx)
        dH = (G @ W2) * (Hpre > 0)
        W2 -= lr * (G.T @ H)
        b2 -= lr * G.sum(axis=0)
        W1 -= lr * (dH.T @ Xb)
        b1 -= lr * dH.sum(axis=0)
    return total / n, -1
