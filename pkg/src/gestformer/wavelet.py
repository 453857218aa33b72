"""Single-level orthonormal 2D Haar transform over the last two axes.

For each non-overlapping 2x2 block ``[[a, b], [c, d]]``::

    LL = (a + b + c + d) / 2      LH = (a - b + c - d) / 2
    HL = (a + b - c - d) / 2      HH = (a - b - c + d) / 2

Odd extents are padded by repeating the last row/column (half-sample
symmetric extension); the padding is recorded on the :class:`SubbandSet` and
cropped again by :func:`idwt2`. Both directions are differentiable.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError
from .ops import take
from .tensor import Tensor, as_tensor, make_result


@dataclass
class SubbandSet:
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor
    pad_rows: bool = False
    pad_cols: bool = False

    def planes(self):
        return (self.ll, self.lh, self.hl, self.hh)


def _analysis(x):
    x = as_tensor(x)
    shape = x.shape
    h, w = shape[-2], shape[-1]
    pad_r, pad_c = h % 2, w % 2
    xd = x.data.reshape((-1, h, w))
    if pad_r or pad_c:
        xd = np.pad(xd, ((0, 0), (0, pad_r), (0, pad_c)), mode="symmetric")
    bands = kernels.haar_forward(np.ascontiguousarray(xd))
    out_shape = (4,) + shape[:-2] + bands.shape[-2:]

    def backward(g):
        # orthonormal: the adjoint of analysis is synthesis
        gp = kernels.haar_inverse(np.ascontiguousarray(g).reshape(bands.shape))
        if pad_r:
            gp[:, h - 1, :] += gp[:, h, :]
        if pad_c:
            gp[:, :, w - 1] += gp[:, :, w]
        return (np.ascontiguousarray(gp[:, :h, :w]).reshape(shape),)

    return make_result(bands.reshape(out_shape), (x,), backward, "dwt2"), bool(pad_r), bool(pad_c)


def dwt2(x):
    """Split ``x`` (..., H, W) into LL, LH, HL, HH planes of (..., ceil(H/2), ceil(W/2))."""
    stacked, pad_r, pad_c = _analysis(x)
    return SubbandSet(*(take(stacked, i) for i in range(4)), pad_rows=pad_r, pad_cols=pad_c)


def idwt2(s):
    """Exact inverse of :func:`dwt2`, including the crop of recorded padding."""
    planes = [as_tensor(p) for p in s.planes()]
    shape = planes[0].shape
    if any(p.shape != shape for p in planes):
        raise DimensionError(f"idwt2: subband shapes differ: {[p.shape for p in planes]}")
    if len(shape) < 2:
        raise DimensionError(f"idwt2: subbands need at least 2 axes, got {shape}")
    h2, w2 = shape[-2], shape[-1]
    stacked = np.stack([p.data.reshape((-1, h2, w2)) for p in planes])
    full = kernels.haar_inverse(stacked)
    h, w = 2 * h2 - int(s.pad_rows), 2 * w2 - int(s.pad_cols)
    out = np.ascontiguousarray(full[:, :h, :w]).reshape(shape[:-2] + (h, w))

    def backward(g):
        gp = np.zeros(full.shape)
        gp[:, :h, :w] = g.reshape((-1, h, w))
        gb = kernels.haar_forward(gp)
        return tuple(gb[i].reshape(shape) for i in range(4))

    return make_result(out, tuple(planes), backward, "idwt2")
