"""Mini-batch training and evaluation of a GestFormerModel."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .optim import Adam, cross_entropy, step_decay
from .tensor import no_grad

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    lr: float = 1e-4
    milestones: tuple = (50, 75)
    decay: float = 0.1
    seed: int = 0


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float

    def to_line(self):
        return f"{self.epoch},{self.loss:.10g},{self.train_acc:.6f},{self.test_acc:.6f}"


@dataclass
class EvalResult:
    accuracy: float
    loss: float
    confusion: np.ndarray   # (n, n): rows true class, columns prediction
    probs: np.ndarray       # (N, n)

    @property
    def predictions(self):
        return np.argmax(self.probs, axis=1)


def predict_logits(model, x, chunk=128):
    with no_grad():
        return np.concatenate([model.logits(x[i:i + chunk]).data for i in range(0, len(x), chunk)])


def evaluate(model, x, y):
    logits = predict_logits(model, x)
    z = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(z)
    probs /= probs.sum(axis=1, keepdims=True)
    y = np.asarray(y, dtype=np.int64)
    pred = np.argmax(probs, axis=1)
    n = model.config.n
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    with no_grad():
        loss = cross_entropy(logits, y).item()
    return EvalResult(float(np.mean(pred == y)), loss, confusion, probs)


def _first_bad_parameter(model):
    for name, p in model.parameters().items():
        if not np.all(np.isfinite(p.data)) or (p.grad is not None and not np.all(np.isfinite(p.grad))):
            return name
    return None


def train(model, train_x, train_y, test_x=None, test_y=None, config=None, on_epoch=None):
    """Train in place. Returns per-epoch metrics, starting with epoch 0 (initial weights).

    ``on_epoch`` is called with each :class:`EpochMetrics` as it is produced.
    """
    cfg = config or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    params = list(model.parameters().values())
    opt = Adam(params, lr=cfg.lr)
    train_y = np.asarray(train_y, dtype=np.int64)
    history = []

    def record(epoch):
        tr = evaluate(model, train_x, train_y)
        te = evaluate(model, test_x, test_y).accuracy if test_x is not None else float("nan")
        if not np.isfinite(tr.loss):
            raise NumericalError(
                f"non-finite loss after epoch {epoch}; first bad parameter: {_first_bad_parameter(model)}"
            )
        row = EpochMetrics(epoch, tr.loss, tr.accuracy, te)
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)

    record(0)
    for epoch in range(1, cfg.epochs + 1):
        opt.lr = step_decay(cfg.lr, epoch, cfg.milestones, cfg.decay)
        order = rng.permutation(len(train_x))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            opt.zero_grad()
            loss = cross_entropy(model.logits(train_x[idx]), train_y[idx])
            if not np.isfinite(loss.item()):
                raise NumericalError(
                    f"non-finite loss in epoch {epoch}; first bad parameter: {_first_bad_parameter(model)}"
                )
            loss.backward()
            opt.step()
        record(epoch)
        logger.debug("epoch %d loss %.4f", epoch, history[-1].loss)
    return history
