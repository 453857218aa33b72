"""Loss and optimizer for training: cross entropy, Adam, step learning-rate decay."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError
from .tensor import as_tensor, make_result


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``.

    logits: (B, n); labels: ints in [0, n).
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs {labels.size} labels")
    n = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        bad = labels[(labels < 0) | (labels >= n)][0]
        raise InputError(f"label {bad} out of range for {n} classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(labels.size)
    loss = np.mean(lse - z[rows, labels])
    batch = labels.size

    def backward(g):
        p = np.exp(z - lse[:, None])
        p[rows, labels] -= 1.0
        return (p * (g / batch),)

    return make_result(np.array(loss), (logits,), backward, "cross_entropy")


def step_decay(base_lr, epoch, milestones=(50, 75), factor=0.1):
    """Learning rate for a 1-based ``epoch``: multiplied by ``factor`` after each milestone."""
    drops = sum(1 for m in milestones if epoch > m)
    return base_lr * factor ** drops


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state):
    """Apply one bias-corrected Adam update in place. ``None`` grads count as zero."""
    if not state.m:
        state.m = [np.zeros(p.shape) for p in params]
        state.v = [np.zeros(p.shape) for p in params]
    if len(params) != len(state.m):
        raise DimensionError(f"adam_step: {len(params)} params but state holds {len(state.m)}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(f"adam_step: param {p.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class Adam:
    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    @property
    def lr(self):
        return self.state.lr

    @lr.setter
    def lr(self, value):
        self.state.lr = value

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
