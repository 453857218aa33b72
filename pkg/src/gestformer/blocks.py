"""Token mixer and feed-forward blocks of one transformer stage.

The feature map of a sample is an (m, k) grid (frames x embedding) treated as
a single-channel image; every block here maps (..., m, k) to (..., m, k).

* WCP: Haar analysis, one depthwise-separable 3x3 conv per subband, synthesis.
* MSP: mean of stride-1 average pools with windows 3, 5 and 7.
* MWPA: WCP followed by MSP, each switchable for ablations.
* GDFN: ``W0 (gelu(D1 P1 x) * D2 P2 x) + x`` with pointwise expansions P1, P2,
  depthwise 3x3 convs D1, D2 and pointwise projection W0.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import ops
from .tensor import Tensor
from .wavelet import SubbandSet, dwt2, idwt2

SUBBANDS = ("ll", "lh", "hl", "hh")
MSP_KERNELS = (3, 5, 7)


class _Weights:
    """Mixin: enumerate ``(name, Tensor)`` pairs in field order."""

    def named(self, prefix=""):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Tensor):
                yield prefix + f.name, value
            elif isinstance(value, _Weights):
                yield from value.named(f"{prefix}{f.name}.")


@dataclass
class SeparableConvWeights(_Weights):
    """Single-channel depthwise 3x3 conv followed by a 1x1 conv, each with bias."""

    dw_weight: Tensor  # (1, 3, 3)
    dw_bias: Tensor    # (1,)
    pw_weight: Tensor  # (1, 1)
    pw_bias: Tensor    # (1,)

    @classmethod
    def identity(cls):
        delta = np.zeros((1, 3, 3))
        delta[0, 1, 1] = 1.0
        return cls(Tensor(delta), Tensor(np.zeros(1)), Tensor(np.ones((1, 1))), Tensor(np.zeros(1)))


@dataclass
class WcpWeights(_Weights):
    ll: SeparableConvWeights
    lh: SeparableConvWeights
    hl: SeparableConvWeights
    hh: SeparableConvWeights

    @classmethod
    def identity(cls):
        return cls(*(SeparableConvWeights.identity() for _ in SUBBANDS))


@dataclass
class GdfnWeights(_Weights):
    """Gated depthwise FFN parameters; ``r`` = expansion ratio."""

    pw1_weight: Tensor  # (k, r*k)
    pw1_bias: Tensor    # (r*k,)
    dw1_weight: Tensor  # (1, 3, 3)
    dw1_bias: Tensor    # (1,)
    pw2_weight: Tensor
    pw2_bias: Tensor
    dw2_weight: Tensor
    dw2_bias: Tensor
    pw0_weight: Tensor  # (r*k, k)
    pw0_bias: Tensor    # (k,)

    @classmethod
    def zeros(cls, k, r=2):
        z = lambda *s: Tensor(np.zeros(s))
        return cls(z(k, r * k), z(r * k), z(1, 3, 3), z(1), z(k, r * k), z(r * k),
                   z(1, 3, 3), z(1), z(r * k, k), z(k))


@dataclass
class FfnWeights(_Weights):
    """Plain two-layer MLP used when the gated FFN is switched off."""

    fc1_weight: Tensor  # (k, r*k)
    fc1_bias: Tensor
    fc2_weight: Tensor  # (r*k, k)
    fc2_bias: Tensor


def _grid_conv(x, weight, bias):
    # (..., m, k) viewed as one channel for the depthwise conv
    y = ops.depthwise_conv2d(ops.reshape(x, x.shape[:-2] + (1,) + x.shape[-2:]), weight, bias)
    return ops.reshape(y, x.shape)


def separable_conv(x, w):
    """Depthwise 3x3 then pointwise 1x1 on a single-channel map (..., H, W)."""
    x4 = ops.reshape(x, x.shape[:-2] + (1,) + x.shape[-2:])
    y = ops.depthwise_conv2d(x4, w.dw_weight, w.dw_bias)
    y = ops.pointwise_conv2d(y, w.pw_weight, w.pw_bias)
    return ops.reshape(y, x.shape)


def wcp_forward(x, w):
    bands = dwt2(x)
    processed = SubbandSet(
        *(separable_conv(plane, getattr(w, name)) for name, plane in zip(SUBBANDS, bands.planes())),
        pad_rows=bands.pad_rows, pad_cols=bands.pad_cols,
    )
    return idwt2(processed)


def msp_forward(x):
    p3, p5, p7 = (ops.avg_pool2d(x, k) for k in MSP_KERNELS)
    return ops.scale(ops.add(ops.add(p3, p5), p7), 1.0 / 3.0)


def mwpa_forward(x, w=None, msp=True, wcp=True):
    """Token mixer. With both switches off this is a plain 3x3 average pool."""
    if wcp:
        x = wcp_forward(x, w)
    return msp_forward(x) if msp else ops.avg_pool2d(x, 3)


def gdfn_forward(p, w):
    g1 = _grid_conv(ops.linear(p, w.pw1_weight, w.pw1_bias), w.dw1_weight, w.dw1_bias)
    g2 = _grid_conv(ops.linear(p, w.pw2_weight, w.pw2_bias), w.dw2_weight, w.dw2_bias)
    gate = ops.mul(ops.gelu(g1), g2)
    return ops.add(ops.linear(gate, w.pw0_weight, w.pw0_bias), p)


def ffn_forward(x, w):
    h = ops.gelu(ops.linear(x, w.fc1_weight, w.fc1_bias))
    return ops.linear(h, w.fc2_weight, w.fc2_bias)
