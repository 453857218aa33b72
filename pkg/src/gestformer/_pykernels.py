"""Pure numpy implementations of the sliding-window kernels.

Same signatures and layouts as the compiled ``_ckernels`` module. All inputs
are C-contiguous float64 arrays; every function returns a fresh array.
"""

import numpy as np


def dwconv2d_forward(x, w):
    """Depthwise cross-correlation with zero "same" padding.

    x: (N, C, H, W); w: (C, kh, kw) with odd kh, kw.
    """
    n, c, h, wd = x.shape
    kh, kw = w.shape[1], w.shape[2]
    ph, pw = kh // 2, kw // 2
    xp = np.zeros((n, c, h + 2 * ph, wd + 2 * pw))
    xp[:, :, ph:ph + h, pw:pw + wd] = x
    out = np.zeros((n, c, h, wd))
    for u in range(kh):
        for v in range(kw):
            out += w[None, :, u, v, None, None] * xp[:, :, u:u + h, v:v + wd]
    return out


def dwconv2d_backward(x, w, g):
    """Gradients of ``dwconv2d_forward`` w.r.t. input and kernels."""
    n, c, h, wd = x.shape
    kh, kw = w.shape[1], w.shape[2]
    ph, pw = kh // 2, kw // 2
    xp = np.zeros((n, c, h + 2 * ph, wd + 2 * pw))
    xp[:, :, ph:ph + h, pw:pw + wd] = x
    gxp = np.zeros_like(xp)
    gw = np.zeros((c, kh, kw))
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + h, v:v + wd] += w[None, :, u, v, None, None] * g
            gw[:, u, v] = np.einsum("nchw,nchw->c", g, xp[:, :, u:u + h, v:v + wd])
    gx = np.ascontiguousarray(gxp[:, :, ph:ph + h, pw:pw + wd])
    return gx, gw


def _window_counts(length, k):
    r = k // 2
    idx = np.arange(length)
    return (np.minimum(idx + r, length - 1) - np.maximum(idx - r, 0) + 1).astype(np.float64)


def _box_sum(x, k):
    # separable zero-padded window sum over the last two axes
    r = k // 2
    n, h, w = x.shape
    xp = np.zeros((n, h, w + 2 * r))
    xp[:, :, r:r + w] = x
    rows = np.zeros((n, h, w))
    for v in range(k):
        rows += xp[:, :, v:v + w]
    rp = np.zeros((n, h + 2 * r, w))
    rp[:, r:r + h, :] = rows
    out = np.zeros((n, h, w))
    for u in range(k):
        out += rp[:, u:u + h, :]
    return out


def avgpool2d_forward(x, k):
    """Stride-1 mean pool over the in-bounds cells of each k x k window. x: (N, H, W)."""
    _, h, w = x.shape
    cnt = _window_counts(h, k)[:, None] * _window_counts(w, k)[None, :]
    return _box_sum(x, k) / cnt


def avgpool2d_backward(g, k):
    _, h, w = g.shape
    cnt = _window_counts(h, k)[:, None] * _window_counts(w, k)[None, :]
    return _box_sum(g / cnt, k)


def haar_forward(x):
    """Orthonormal single-level Haar analysis of even-sized planes.

    x: (N, H, W) -> (4, N, H/2, W/2) stacked as LL, LH, HL, HH.
    """
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    out = np.empty((4,) + a.shape)
    out[0] = (a + b + c + d) * 0.5
    out[1] = (a - b + c - d) * 0.5
    out[2] = (a + b - c - d) * 0.5
    out[3] = (a - b - c + d) * 0.5
    return out


def haar_inverse(s):
    """Inverse of ``haar_forward``. s: (4, N, h, w) -> (N, 2h, 2w)."""
    ll, lh, hl, hh = s[0], s[1], s[2], s[3]
    n, h, w = ll.shape
    out = np.empty((n, 2 * h, 2 * w))
    out[:, 0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[:, 0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    out[:, 1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    out[:, 1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return out
