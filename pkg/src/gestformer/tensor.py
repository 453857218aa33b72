"""Dense float64 tensor with a reverse-mode tape.

Every op in :mod:`gestformer.ops` returns a fresh :class:`Tensor` and, when any
input requires a gradient, records a closure that maps the output gradient to
input gradients. :meth:`Tensor.backward` walks the recorded graph in reverse
topological order. Only leaf tensors created with ``requires_grad=True``
(parameters) keep their gradient; intermediate gradients are discarded.
"""

import contextlib

import numpy as np

from .errors import ContractError, DimensionError

_recording = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite differences)."""
    global _recording
    previous = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = previous


def is_recording():
    return _recording


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, *, _parents=(), _backward=None, op="leaf"):
        arr = np.array(data, dtype=np.float64, order="C", copy=True) if not (
            isinstance(data, np.ndarray) and data.dtype == np.float64 and data.flags.c_contiguous
        ) else data
        if 0 in arr.shape:
            raise DimensionError(f"tensor extents must be >= 1, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    # -- shape metadata ------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # -- operators (thin wrappers over ops) ----------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    # -- reverse mode --------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        ``self`` must be a scalar. Repeated calls accumulate.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(data, parents, backward, op):
    """Wrap an op output, recording the backward closure when needed."""
    if _recording and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward, op=op)
    return Tensor(data, op=op)
