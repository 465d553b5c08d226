"""Cross-entropy training with Adam and validation-loss early stopping."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DegenerateLabels, InvalidParameter
from ..seeding import make_rng
from .autodiff import Tensor
from .models import Model, predict_logits

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_epochs: int = 500
    patience: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32
    validation_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.patience < self.max_epochs:
            raise InvalidParameter("patience must be smaller than max_epochs")
        if self.learning_rate < 0:
            raise InvalidParameter("learning_rate must be >= 0")
        if not 0 <= self.validation_fraction < 1:
            raise InvalidParameter("validation_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.train_loss)


class Adam:
    def __init__(self, params: list[Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.step_count = 0

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1 - b1 ** self.step_count
        correction2 = 1 - b2 ** self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if self.lr:
                p.data = p.data - self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            p.grad = None


def cross_entropy(model: Model, x: np.ndarray, y: np.ndarray) -> Tensor:
    logp = model.logits(Tensor(x)).log_softmax(axis=1)
    return -logp[np.arange(len(y)), np.asarray(y)].mean()


def loss_value(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    logits = predict_logits(model, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(y)), y].mean())


def stratified_split(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Indices (train, validation) with ``fraction`` of each class held out."""
    train_idx, val_idx = [], []
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(fraction * len(idx)))
        if fraction > 0 and len(idx) > 1:
            n_val = min(max(n_val, 1), len(idx) - 1)
        val_idx.append(idx[:n_val])
        train_idx.append(idx[n_val:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(val_idx))


def train(model: Model, x: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None):
    """Fit ``model`` in place and return ``(model, history)``.

    Training stops after ``cfg.max_epochs`` epochs or once the validation loss
    has not improved for ``cfg.patience`` consecutive epochs.  The parameters
    of the best validation epoch are restored before returning.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training split contains a single class")

    rng = make_rng(cfg.seed, "train")
    tr, va = stratified_split(y, cfg.validation_fraction, rng)
    if len(va) == 0:
        va = tr
    x_tr, y_tr, x_va, y_va = x[tr], y[tr], x[va], y[va]

    opt = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history = TrainingHistory()
    best_loss, best_params, stale = np.inf, model.get_flat(), 0

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(x_tr))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss = cross_entropy(model, x_tr[batch], y_tr[batch])
            loss.backward()
            opt.step()
        history.train_loss.append(loss_value(model, x_tr, y_tr))
        val = loss_value(model, x_va, y_va)
        history.val_loss.append(val)
        if val < best_loss:
            best_loss, best_params, stale = val, model.get_flat(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                history.stopped_early = True
                break

    model.set_flat(best_params)
    logger.debug("%s trained for %d epochs (best %d, val loss %.4f)",
                 model.architecture, len(history), history.best_epoch, best_loss)
    return model, history
