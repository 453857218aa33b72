"""Differentiable primitives over :class:`~gestformer.tensor.Tensor`.

Spatial ops act on the last two axes. Channel-aware ops (depthwise and
pointwise convolution) take ``(..., C, H, W)`` inputs; any leading axes are
treated as batch.
"""

import numpy as np
from scipy.special import erf

from . import kernels
from .errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor, make_result

LAYER_NORM_EPS = 1e-5
POOL_KERNELS = (3, 5, 7)
_SQRT_HALF = np.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(g, shape):
    # sum out the axes numpy broadcasting added or stretched
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise ---------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return make_result(ad * bd, (a, b), backward, "mul")


def scale(x, c):
    """Multiply by a Python scalar constant."""
    x = as_tensor(x)
    c = float(c)
    return make_result(x.data * c, (x,), lambda g: (g * c,), "scale")


def gelu(x):
    """Exact GELU, ``x * Phi(x)`` with the Gaussian CDF."""
    x = as_tensor(x)
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _SQRT_HALF))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return make_result(xd * cdf, (x,), backward, "gelu")


# -- reductions and reshaping --------------------------------------------------

def sum(x):
    x = as_tensor(x)
    shape = x.shape
    return make_result(np.array(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean_axis(x, axis):
    x = as_tensor(x)
    shape = x.shape
    axis = axis % x.ndim
    n = shape[axis]

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / n, shape).copy(),)

    return make_result(x.data.mean(axis=axis), (x,), backward, "mean")


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def take(x, index):
    """Select ``x[index]`` along the leading axis."""
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        out[index] = g
        return (out,)

    return make_result(np.ascontiguousarray(x.data[index]), (x,), backward, "take")


# -- linear algebra ------------------------------------------------------------

def matmul(a, b):
    """``a @ b`` with ``a`` of shape (..., M, K) and ``b`` of shape (K, N)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 2 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ bd.T
        gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return make_result(ad @ bd, (a, b), backward, "matmul")


def linear(x, weight, bias=None):
    """Affine map on the last axis: ``x @ weight + bias``."""
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def layer_norm(x, scale_, shift):
    """Normalize over the last axis, then apply per-feature scale and shift."""
    x, scale_, shift = as_tensor(x), as_tensor(scale_), as_tensor(shift)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = xc * inv
    gamma = scale_.data

    def backward(g):
        gxhat = g * gamma
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        gs = (g * xhat).reshape(-1, xd.shape[-1]).sum(axis=0)
        gb = g.reshape(-1, xd.shape[-1]).sum(axis=0)
        return gx, gs.reshape(scale_.shape), gb.reshape(shift.shape)

    return make_result(xhat * gamma + shift.data, (x, scale_, shift), backward, "layer_norm")


def softmax(x):
    """Softmax over the last axis."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return make_result(p, (x,), backward, "softmax")


def log_softmax(x):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return make_result(out, (x,), backward, "log_softmax")


# -- convolution and pooling ---------------------------------------------------

def _as_nchw(arr):
    lead = arr.shape[:-3]
    return arr.reshape((-1,) + arr.shape[-3:]), lead


def depthwise_conv2d(x, kernel, bias=None):
    """Per-channel 2D cross-correlation, zero "same" padding, stride 1.

    x: (..., C, H, W); kernel: (C, k, k) with k odd; bias: (C,) or None.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if kernel.ndim != 3:
        raise DimensionError(f"depthwise kernel must be (C, k, k), got {kernel.shape}")
    kh, kw = kernel.shape[1], kernel.shape[2]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError(f"depthwise kernel size must be odd, got {kh}x{kw}")
    if x.ndim < 3 or x.shape[-3] != kernel.shape[0]:
        raise DimensionError(f"depthwise_conv2d: input {x.shape} does not match kernels {kernel.shape}")
    xd, lead = _as_nchw(x.data)
    kd = kernel.data
    out = kernels.dwconv2d_forward(xd, kd).reshape(x.shape)

    def backward(g):
        gx, gk = kernels.dwconv2d_backward(xd, kd, np.ascontiguousarray(g).reshape(xd.shape))
        return gx.reshape(x.shape), gk

    y = make_result(out, (x, kernel), backward, "depthwise_conv2d")
    if bias is not None:
        y = add(y, reshape(bias, (-1, 1, 1)))
    return y


def pointwise_conv2d(x, weight, bias=None):
    """1x1 convolution: per-pixel linear map across channels.

    x: (..., C, H, W); weight: (C_out, C); bias: (C_out,) or None.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.ndim < 3 or x.shape[-3] != weight.shape[1]:
        raise DimensionError(f"pointwise_conv2d: input {x.shape} does not match weights {weight.shape}")
    xd, wd = x.data, weight.data
    out = np.einsum("oc,...chw->...ohw", wd, xd)

    def backward(g):
        gx = np.einsum("oc,...ohw->...chw", wd, g)
        c_out, c_in = wd.shape
        gw = np.einsum("noi,nci->oc", g.reshape(-1, c_out, g.shape[-2] * g.shape[-1]),
                       xd.reshape(-1, c_in, xd.shape[-2] * xd.shape[-1]))
        return gx, gw

    y = make_result(out, (x, weight), backward, "pointwise_conv2d")
    if bias is not None:
        y = add(y, reshape(bias, (-1, 1, 1)))
    return y


def avg_pool2d(x, kernel_size):
    """Stride-1 average pool over the last two axes.

    Each output is the mean of the in-bounds cells of its window, so constant
    maps stay constant at the borders.
    """
    if kernel_size not in POOL_KERNELS:
        raise ConfigError(f"pool kernel must be one of {POOL_KERNELS}, got {kernel_size}")
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"avg_pool2d needs at least 2 axes, got {x.shape}")
    shape = x.shape
    flat = x.data.reshape((-1,) + shape[-2:])
    out = kernels.avgpool2d_forward(flat, kernel_size).reshape(shape)

    def backward(g):
        gf = np.ascontiguousarray(g).reshape(flat.shape)
        return (kernels.avgpool2d_backward(gf, kernel_size).reshape(shape),)

    return make_result(out, (x,), backward, f"avg_pool{kernel_size}")


__all__ = [
    "Tensor", "add", "sub", "mul", "scale", "gelu", "sum", "mean_axis", "reshape", "take",
    "matmul", "linear", "layer_norm", "softmax", "log_softmax", "depthwise_conv2d",
    "pointwise_conv2d", "avg_pool2d",
]
