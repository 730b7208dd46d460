"""Minibatch SGD training with plateau LR decay, early stopping and a lambda sweep.

The models are small stand-ins (linear softmax or one ReLU hidden layer)
with hand-written gradients; the regularized loss itself is model-agnostic.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import _backend
from .cost_matrices import as_cost_matrix, ast_cost_matrix, matrix_from_csv, quadratic_cost_matrix
from .errors import (
    EmptyInputError,
    InvalidDimensionError,
    InvalidHyperparameterError,
    InvalidInputError,
    TrainingDivergedError,
)
from .losses import BASE_LOSSES, LossHyper, smoothing_targets, softmax
from .metrics import PredictionSet, confusion_matrix, quadratic_weighted_kappa

log = logging.getLogger(__name__)

__all__ = [
    "Model",
    "TrainConfig",
    "EpochRecord",
    "TrainHistory",
    "SweepResult",
    "init_model",
    "forward",
    "predict_proba",
    "oversample_indices",
    "resolve_cost_matrix",
    "train",
    "lambda_sweep",
]

IMPROVEMENT_THRESHOLD = 1e-4

KINDS = ("linear", "hidden")


@dataclass
class Model:
    kind: str
    input_dim: int
    hidden_dim: int
    num_classes: int
    params: dict[str, np.ndarray]

    def copy(self) -> "Model":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "num_classes": self.num_classes,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        params = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in d["params"].items()}
        model = cls(d["kind"], int(d["input_dim"]), int(d["hidden_dim"]), int(d["num_classes"]), params)
        _check_shapes(model)
        return model


def _check_shapes(model: Model) -> None:
    D, H, C = model.input_dim, model.hidden_dim, model.num_classes
    if model.kind == "linear":
        want = {"W": (C, D), "b": (C,)}
    else:
        want = {"W1": (H, D), "b1": (H,), "W2": (C, H), "b2": (C,)}
    got = {k: v.shape for k, v in model.params.items()}
    if got != want:
        raise InvalidDimensionError(f"parameter shapes {got} do not match {want}")
    if not all(np.all(np.isfinite(v)) for v in model.params.values()):
        raise InvalidInputError("model parameters must be finite")


def init_model(kind: str, input_dim: int, hidden_dim: int, num_classes: int, seed: int = 0) -> Model:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    if kind not in KINDS:
        raise InvalidDimensionError(f"unknown model kind {kind!r}; choose from {KINDS}")
    if input_dim < 1 or num_classes < 2 or hidden_dim < 0:
        raise InvalidDimensionError("need input_dim >= 1, num_classes >= 2, hidden_dim >= 0")
    if kind == "hidden" and hidden_dim == 0:
        raise InvalidDimensionError("a hidden-layer model needs hidden_dim >= 1")
    if kind == "linear" and hidden_dim != 0:
        raise InvalidDimensionError("a linear model has hidden_dim 0")
    rng = np.random.default_rng([int(seed), 0])

    def uniform(rows, fan_in):
        r = 1.0 / math.sqrt(fan_in)
        return np.ascontiguousarray(rng.uniform(-r, r, size=(rows, fan_in)))

    if kind == "linear":
        params = {"W": uniform(num_classes, input_dim), "b": np.zeros(num_classes)}
    else:
        params = {
            "W1": uniform(hidden_dim, input_dim),
            "b1": np.zeros(hidden_dim),
            "W2": uniform(num_classes, hidden_dim),
            "b2": np.zeros(num_classes),
        }
    return Model(kind, input_dim, hidden_dim, num_classes, params)


def forward(model: Model, features) -> np.ndarray:
    """Logits for one feature vector ``(D,)`` or a batch ``(N, D)``."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise InvalidDimensionError(f"expected {model.input_dim} features, got {x.shape[-1]}")
    p = model.params
    if model.kind == "linear":
        return x @ p["W"].T + p["b"]
    h = np.maximum(x @ p["W1"].T + p["b1"], 0.0)
    return h @ p["W2"].T + p["b2"]


def predict_proba(model: Model, features) -> np.ndarray:
    return softmax(forward(model, features))


def oversample_indices(labels, seed) -> np.ndarray:
    """Resample every present class with replacement up to the majority count, then shuffle."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInputError("cannot oversample an empty label sequence")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    target = counts.max()
    parts = []
    for g in classes:
        members = np.flatnonzero(labels == g)
        parts.append(members[rng.integers(0, members.size, size=target)])
    out = np.concatenate(parts)
    rng.shuffle(out)
    return out.astype(np.intp)


@dataclass
class TrainConfig:
    base_loss: str = "ce"
    lam: float = 0.0
    cost_matrix: str = "none"  # "none" | "quadratic" | "ast:<confusion csv>" | "csv:<cost csv>"
    batch_size: int = 8
    lr: float = 0.001
    plateau_factor: float = 10.0
    plateau_patience: int = 3
    early_stop_patience: int = 10
    max_epochs: int = 100
    oversample: bool = True
    seed: int = 0
    alpha: float = 1.0
    gamma: float = 2.0
    sigma: float = 1.0
    model_kind: str = "linear"
    hidden_dim: int = 0
    standardize: bool = True

    def validate(self) -> None:
        if self.base_loss not in BASE_LOSSES:
            raise InvalidHyperparameterError(f"unknown base loss {self.base_loss!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidHyperparameterError("lambda must be >= 0")
        for name in ("batch_size", "plateau_patience", "early_stop_patience", "max_epochs"):
            if int(getattr(self, name)) < 1:
                raise InvalidHyperparameterError(f"{name} must be >= 1")
        if not self.lr > 0:
            raise InvalidHyperparameterError("lr must be > 0")
        if not self.plateau_factor > 1:
            raise InvalidHyperparameterError("plateau_factor must be > 1")
        self.hyper.validate(self.base_loss)

    @property
    def hyper(self) -> LossHyper:
        return LossHyper(alpha=self.alpha, gamma=self.gamma, sigma=self.sigma)

    @property
    def regularized(self) -> bool:
        return self.lam > 0 and self.cost_matrix != "none"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def resolve_cost_matrix(source: str, num_classes: int) -> np.ndarray | None:
    """Build the cost matrix named by a config ``cost_matrix`` string."""
    if source == "none":
        return None
    if source == "quadratic":
        return quadratic_cost_matrix(num_classes)
    kind, _, path = source.partition(":")
    if kind == "ast" and path:
        M = ast_cost_matrix(matrix_from_csv(path))
    elif kind == "csv" and path:
        M = as_cost_matrix(matrix_from_csv(path))
    else:
        raise InvalidInputError(f"unrecognised cost matrix source {source!r}")
    if M.shape[0] != num_classes:
        raise InvalidDimensionError(f"cost matrix has {M.shape[0]} classes, data has {num_classes}")
    return M


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_kappa: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_kappa: float = -math.inf

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)

    @property
    def lrs(self) -> list[float]:
        return [r.lr for r in self.records]


def _fold_standardization(model: Model, mean: np.ndarray, scale: np.ndarray) -> Model:
    """Rewrite a model trained on ``(x - mean) / scale`` to act on raw ``x``."""
    out = model.copy()
    w, b = ("W", "b") if model.kind == "linear" else ("W1", "b1")
    W = out.params[w] / scale[None, :]
    out.params[b] = out.params[b] - W @ mean
    out.params[w] = np.ascontiguousarray(W)
    return out


def _val_kappa(model: Model, X, y) -> float:
    preds = PredictionSet(y, predict_proba(model, X))
    return quadratic_weighted_kappa(confusion_matrix(preds))


def train(
    config: TrainConfig,
    train_X,
    train_y,
    val_X,
    val_y,
    num_classes: int | None = None,
    cost_matrix: np.ndarray | None = None,
) -> tuple[Model, TrainHistory]:
    """Train a model and return the parameters of its best validation epoch.

    ``cost_matrix`` overrides ``config.cost_matrix`` when given. The learning
    rate is divided by ``plateau_factor`` after ``plateau_patience`` epochs
    without validation kappa improving by more than 1e-4; training stops after
    ``early_stop_patience`` such epochs or at ``max_epochs``.

    With ``config.standardize`` the features are z-scored with training-split
    statistics during optimization; the returned model has that map folded
    into its first layer and so takes raw features.
    """
    config.validate()
    X = np.ascontiguousarray(train_X, dtype=np.float64)
    y = np.ascontiguousarray(train_y, dtype=np.intp)
    vX = np.ascontiguousarray(val_X, dtype=np.float64)
    vy = np.ascontiguousarray(val_y, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] == 0 or vX.ndim != 2 or vX.shape[0] == 0:
        raise EmptyInputError("training and validation splits must be non-empty 2-D feature arrays")
    if X.shape[0] != y.shape[0] or vX.shape[0] != vy.shape[0] or X.shape[1] != vX.shape[1]:
        raise InvalidDimensionError("features and labels are misaligned")
    C = num_classes or int(max(y.max(), vy.max())) + 1
    if np.unique(vy).size < 2:
        raise InvalidInputError("validation split needs at least 2 classes")
    if config.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = np.ascontiguousarray((X - mean) / scale)
        vX = np.ascontiguousarray((vX - mean) / scale)

    M = cost_matrix if cost_matrix is not None else resolve_cost_matrix(config.cost_matrix, C)
    lam = float(config.lam) if M is not None else 0.0
    if M is None:
        M = np.zeros((C, C))
    M = np.ascontiguousarray(as_cost_matrix(M))
    if M.shape[0] != C:
        raise InvalidDimensionError(f"cost matrix has {M.shape[0]} classes, data has {C}")

    if config.base_loss == "fl":
        base_code, targets = 1, np.eye(C)
    elif config.base_loss == "nuls":
        base_code, targets = 0, smoothing_targets(C, config.sigma)
    else:
        base_code, targets = 0, np.eye(C)
    targets = np.ascontiguousarray(targets)

    hidden = config.hidden_dim if config.model_kind == "hidden" else 0
    model = init_model(config.model_kind, X.shape[1], hidden, C, seed=config.seed)
    k = _backend.kernels
    history = TrainHistory()
    best_model = model.copy()
    lr = float(config.lr)
    ref = -math.inf
    since_best = 0
    since_drop = 0
    for epoch in range(config.max_epochs):
        rng = np.random.default_rng([int(config.seed), 1, epoch])
        order = oversample_indices(y, rng) if config.oversample else rng.permutation(y.size).astype(np.intp)
        p = model.params
        if model.kind == "linear":
            loss, bad = k.sgd_epoch_linear(
                p["W"], p["b"], X, y, order, config.batch_size, lr,
                base_code, lam, M, targets, config.alpha, config.gamma,
            )
        else:
            loss, bad = k.sgd_epoch_mlp(
                p["W1"], p["b1"], p["W2"], p["b2"], X, y, order, config.batch_size, lr,
                base_code, lam, M, targets, config.alpha, config.gamma,
            )
        if bad >= 0 or not all(np.all(np.isfinite(v)) for v in p.values()):
            raise TrainingDivergedError(epoch, max(bad, 0), lam=config.lam)
        kappa = _val_kappa(model, vX, vy)
        history.records.append(EpochRecord(epoch, float(loss), float(kappa), lr))
        log.debug("epoch %d loss %.5f val kappa %.4f lr %g", epoch, loss, kappa, lr)
        if kappa > history.best_val_kappa:
            history.best_val_kappa = float(kappa)
            history.best_epoch = epoch
            best_model = model.copy()
        if kappa > ref + IMPROVEMENT_THRESHOLD:
            ref = kappa
            since_best = 0
            since_drop = 0
            continue
        since_best += 1
        since_drop += 1
        if since_best >= config.early_stop_patience:
            break
        if since_drop >= config.plateau_patience:
            lr /= config.plateau_factor
            since_drop = 0
    if config.standardize:
        best_model = _fold_standardization(best_model, mean, scale)
    return best_model, history


@dataclass
class SweepResult:
    trials: list[tuple[float, float]]
    selected_lambda: float
    best_kappa: float
    models: dict[float, Model] = field(default_factory=dict, repr=False)
    histories: dict[float, TrainHistory] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "trials": [{"lambda": lam, "val_kappa": kap} for lam, kap in self.trials],
            "selected_lambda": self.selected_lambda,
            "best_kappa": self.best_kappa,
        }

    @property
    def best_regularized_lambda(self) -> float | None:
        """Best strictly positive lambda (smallest wins ties)."""
        pos = [(lam, kap) for lam, kap in self.trials if lam > 0]
        if not pos:
            return None
        return _select(pos)[0]


def _select(trials):
    # highest kappa, smallest lambda on ties
    return max(trials, key=lambda t: (t[1], -t[0]))


TrainFn = Callable[[TrainConfig], tuple[Model, TrainHistory]]


def lambda_sweep(
    template: TrainConfig,
    train_X=None,
    train_y=None,
    val_X=None,
    val_y=None,
    num_classes: int | None = None,
    cost_matrix: np.ndarray | None = None,
    initial: tuple[float, ...] = (0.0, 0.1, 1.0),
    max_lambda: float = 1e6,
    train_fn: TrainFn | None = None,
) -> SweepResult:
    """Train at each initial lambda, then keep multiplying the largest by 10 while it wins.

    A model's score is its best validation kappa. ``train_fn`` replaces the
    default training call (it receives the per-lambda config).
    """
    if train_fn is None:
        def train_fn(cfg):
            return train(cfg, train_X, train_y, val_X, val_y, num_classes=num_classes, cost_matrix=cost_matrix)

    result = SweepResult(trials=[], selected_lambda=0.0, best_kappa=-math.inf)

    def run(lam: float):
        cfg = replace(template, lam=lam)
        model, hist = train_fn(cfg)
        result.trials.append((lam, float(hist.best_val_kappa)))
        result.models[lam] = model
        result.histories[lam] = hist
        log.info("lambda %g: val kappa %.4f", lam, hist.best_val_kappa)

    for lam in initial:
        run(float(lam))
    while True:
        largest = max(lam for lam, _ in result.trials)
        if _select(result.trials)[0] != largest or largest * 10 > max_lambda or largest == 0:
            break
        run(largest * 10)
    result.selected_lambda, result.best_kappa = _select(result.trials)
    return result
