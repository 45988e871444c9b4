"""Losses, Adam/AdamW updates, stratified splitting and the early-stopped training loop."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, LengthMismatch, NonFiniteLoss, ShapeMismatch, TooFewRows
from .features import FeatureMatrix
from .models import EVAL, TRAIN, Model, classify, forward, gradients
from .seeding import derive_seed, make_rng

BCE_CLIP = 1e-7
# a validation loss must drop by more than this to count as an improvement
IMPROVEMENT_TOL = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 9
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(float(f) for f in self.split))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise ConfigError("epsilon must be positive and weight_decay non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be positive")
        if len(self.split) != 3 or min(self.split) <= 0 or abs(sum(self.split) - 1.0) > 1e-12:
            raise ConfigError(f"split fractions must be positive and sum to 1, got {self.split}")
        if self.optimizer not in ("adam", "adamw"):
            raise ConfigError(f"optimizer must be 'adam' or 'adamw', got {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = list(self.split)
        return d


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "OptimizerState":
        return cls([np.zeros_like(p, dtype=np.float64) for p in params],
                   [np.zeros_like(p, dtype=np.float64) for p in params], 0)


# ---------------------------------------------------------------------------
# losses

def _pair(yhat, y):
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if yhat.shape != y.shape:
        raise LengthMismatch(f"{yhat.shape[0]} predictions vs {y.shape[0]} targets")
    if yhat.shape[0] == 0:
        raise LengthMismatch("loss of an empty sequence")
    return yhat, y


def bce_loss(yhat, y) -> float:
    """Mean binary cross-entropy with predictions clipped to [1e-7, 1 - 1e-7]."""
    yhat, y = _pair(yhat, y)
    p = np.clip(yhat, BCE_CLIP, 1.0 - BCE_CLIP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mse_loss(yhat, y) -> float:
    yhat, y = _pair(yhat, y)
    return float(np.mean((yhat - y) ** 2))


# ---------------------------------------------------------------------------
# optimizers

def _check_shapes(params, grads, state):
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    for p, g, m in zip(params, grads, state.m):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise ShapeMismatch(f"shape mismatch {np.shape(p)} / {np.shape(g)} / {np.shape(m)}")


def _adam_direction(grads, state: OptimizerState, cfg: TrainConfig):
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    m = [b1 * mi + (1.0 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1.0 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    steps = [(mi / c1) / (np.sqrt(vi / c2) + cfg.epsilon) for mi, vi in zip(m, v)]
    return steps, OptimizerState(m, v, t)


def adam_step(params, grads, state: OptimizerState, cfg: TrainConfig):
    """One Adam update; returns new ``(params, state)`` and leaves inputs untouched."""
    params = [np.asarray(p, dtype=np.float64) for p in params]
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    _check_shapes(params, grads, state)
    steps, new_state = _adam_direction(grads, state, cfg)
    return [p - cfg.learning_rate * s for p, s in zip(params, steps)], new_state


def adamw_step(params, grads, state: OptimizerState, cfg: TrainConfig, decay=None):
    """Adam update plus decoupled weight decay ``theta -= lr * wd * theta``.

    ``decay`` flags which parameters decay (weights, not biases); by default
    all of them do. The decay term uses the pre-update parameter value.
    """
    params = [np.asarray(p, dtype=np.float64) for p in params]
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    _check_shapes(params, grads, state)
    if decay is None:
        decay = [True] * len(params)
    steps, new_state = _adam_direction(grads, state, cfg)
    lr, wd = cfg.learning_rate, cfg.weight_decay
    out = []
    for p, s, flag in zip(params, steps, decay):
        new = p - lr * s
        if flag and wd:
            new = new - lr * wd * p
        out.append(new)
    return out, new_state


# ---------------------------------------------------------------------------
# data splitting

@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def to_dict(self) -> dict:
        return {k: [int(i) for i in getattr(self, k)] for k in ("train", "val", "test")}


def _labels_of(data) -> np.ndarray:
    return np.asarray(data.labels if isinstance(data, FeatureMatrix) else data)


def split_dataset(data, cfg: TrainConfig) -> Split:
    """Seeded, label-stratified train/val/test partition of row indices.

    Split sizes are fixed from the fractions first; positives are then
    apportioned to val and test in proportion to the global positive rate,
    and train takes the remainder. Index arrays are returned sorted.
    """
    labels = _labels_of(data)
    n = labels.shape[0]
    if n < 10:
        raise TooFewRows(f"need at least 10 rows to split, got {n}")
    _, f_val, f_test = cfg.split
    n_val = int(round(n * f_val))
    n_test = int(round(n * f_test))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise TooFewRows(f"split {cfg.split} leaves an empty partition for n={n}")

    rng = make_rng(derive_seed(cfg.seed, "split"))
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels != 1)
    pos = pos[rng.permutation(pos.shape[0])]
    neg = neg[rng.permutation(neg.shape[0])]
    rate = pos.shape[0] / n

    def apportion(size, pos_left, neg_left):
        k = int(round(size * rate))
        # clamp so both classes can fill the partition
        return min(max(k, size - neg_left, 0), size, pos_left)

    val_pos = apportion(n_val, pos.shape[0], neg.shape[0])
    val_neg = n_val - val_pos
    test_pos = apportion(n_test, pos.shape[0] - val_pos, neg.shape[0] - val_neg)
    test_neg = n_test - test_pos

    val = np.concatenate([pos[:val_pos], neg[:val_neg]])
    test = np.concatenate([pos[val_pos:val_pos + test_pos], neg[val_neg:val_neg + test_neg]])
    train = np.concatenate([pos[val_pos + test_pos:], neg[val_neg + test_neg:]])
    return Split(np.sort(train), np.sort(val), np.sort(test))


# ---------------------------------------------------------------------------
# training

@dataclass
class EarlyStopping:
    """Patience bookkeeping over a stream of validation losses (epochs are 1-based)."""

    patience: int
    best_loss: float = math.inf
    best_epoch: int = 0
    epoch: int = 0
    bad_epochs: int = 0

    def update(self, val_loss: float) -> bool:
        """Record one epoch's loss; True when this epoch is a new best."""
        self.epoch += 1
        if val_loss < self.best_loss - IMPROVEMENT_TOL:
            self.best_loss = val_loss
            self.best_epoch = self.epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def fit_loop(run_epoch, validate, snapshot, max_epochs: int, patience: int):
    """Generic early-stopped loop.

    ``run_epoch(epoch)`` trains one epoch and returns its training loss,
    ``validate()`` returns the validation loss and ``snapshot()`` captures
    the state to restore. Returns ``(best_snapshot, stopper, train_losses,
    val_losses, stop_reason)``.
    """
    stopper = EarlyStopping(patience)
    train_losses, val_losses = [], []
    best = snapshot()
    reason = "max_epochs"
    for epoch in range(1, max_epochs + 1):
        train_losses.append(run_epoch(epoch))
        val = validate()
        if not math.isfinite(val):
            raise NonFiniteLoss(f"validation loss became {val} at epoch {epoch}")
        val_losses.append(val)
        if stopper.update(val):
            best = snapshot()
        if stopper.should_stop:
            reason = "early_stop"
            break
    return best, stopper, train_losses, val_losses, reason


@dataclass
class Metrics:
    accuracy: float
    mse: float | None
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    model: dict
    config: dict
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int
    best_val_loss: float
    stop_reason: str
    epochs_run: int
    test_metrics: Metrics | None = None
    split_sizes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["test_metrics"] = self.test_metrics.to_dict() if self.test_metrics else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def eval_loss(model: Model, matrix: FeatureMatrix) -> float:
    """Eval-mode loss: MSE for linear, clipped BCE otherwise."""
    out = forward(model, matrix.rows, EVAL).output
    if model.kind == "linear":
        return mse_loss(out, matrix.labels)
    return bce_loss(out, matrix.labels)


def evaluate_model(model: Model, matrix: FeatureMatrix, threshold: float = 0.5) -> Metrics:
    """Accuracy at ``threshold``; MSE of raw outputs for the two baselines."""
    from .evaluation import accuracy

    out = forward(model, matrix.rows, EVAL).output
    acc = accuracy(classify(out, threshold), matrix.labels)
    mse = mse_loss(out, matrix.labels) if model.kind in ("linear", "logistic") else None
    return Metrics(acc, mse, int(matrix.n))


def train(model: Model, matrix: FeatureMatrix, cfg: TrainConfig, split: Split | None = None):
    """Mini-batch training with early stopping on validation loss.

    ``matrix`` must already be standardized with training-split statistics.
    Without an explicit ``split`` the one produced by ``split_dataset(matrix,
    cfg)`` is used. The returned model holds the best-validation parameters.
    """
    split = split if split is not None else split_dataset(matrix, cfg)
    train_m = matrix.take(split.train)
    val_m = matrix.take(split.val)
    test_m = matrix.take(split.test)

    shuffle_rng = make_rng(derive_seed(cfg.seed, "shuffle"))
    dropout_rng = make_rng(derive_seed(cfg.seed, "dropout"))
    current = model.copy()
    state = OptimizerState.zeros_like(current.parameters())
    decay = current.weight_mask()
    n = train_m.n

    def run_epoch(epoch):
        nonlocal current, state
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            grads, loss, _ = gradients(current, train_m.rows[idx], train_m.labels[idx], TRAIN, dropout_rng)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss} at epoch {epoch}")
            if cfg.optimizer == "adamw":
                params, state = adamw_step(current.parameters(), grads, state, cfg, decay)
            else:
                params, state = adam_step(current.parameters(), grads, state, cfg)
            current = current.with_parameters(params)
            total += loss * idx.shape[0]
        return total / n

    best, stopper, train_losses, val_losses, reason = fit_loop(
        run_epoch,
        lambda: eval_loss(current, val_m),
        lambda: current.copy(),
        cfg.max_epochs,
        cfg.patience,
    )
    report = TrainReport(
        model={"kind": model.config.kind, "input_dim": model.config.input_dim,
               "dropout_rate": model.config.dropout_rate, "seed": model.config.seed,
               "features": list(matrix.columns)},
        config=cfg.to_dict(),
        train_loss=train_losses,
        val_loss=val_losses,
        best_epoch=stopper.best_epoch,
        best_val_loss=stopper.best_loss,
        stop_reason=reason,
        epochs_run=len(val_losses),
        test_metrics=evaluate_model(best, test_m),
        split_sizes={"train": int(split.train.shape[0]), "val": int(split.val.shape[0]),
                     "test": int(split.test.shape[0])},
    )
    return best, report
