"""Slow reference implementations written straight from the definitions.

Nothing here imports the package; the tests compare the package against these.
"""

import math

import numpy as np


def matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            out[i, j] = math.fsum(a[i, t] * b[t, j] for t in range(k))
    return out


def conv2d_depthwise(x, w, bias=None):
    """x (C, H, W), w (C, kh, kw), zero 'same' padding."""
    c, h, wd = x.shape
    _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros_like(x, dtype=np.float64)
    for ch in range(c):
        for i in range(h):
            for j in range(wd):
                acc = 0.0
                for u in range(kh):
                    for v in range(kw):
                        ii, jj = i + u - ph, j + v - pw
                        if 0 <= ii < h and 0 <= jj < wd:
                            acc += x[ch, ii, jj] * w[ch, u, v]
                out[ch, i, j] = acc + (0.0 if bias is None else bias[ch])
    return out


def conv2d_pointwise(x, w, bias=None):
    """x (C, H, W), w (Cout, C): a matmul at every pixel."""
    c, h, wd = x.shape
    out = np.zeros((w.shape[0], h, wd))
    for i in range(h):
        for j in range(wd):
            out[:, i, j] = w @ x[:, i, j] + (0.0 if bias is None else bias)
    return out


def avg_pool(x, k):
    """Stride-1 'same' mean over the in-bounds part of each k x k window."""
    h, w = x.shape[-2:]
    r = k // 2
    out = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(*x.shape[:-2]):
        plane = x[idx]
        for i in range(h):
            for j in range(w):
                win = plane[max(0, i - r):i + r + 1, max(0, j - r):j + r + 1]
                out[idx + (i, j)] = win.sum() / win.size
    return out


def haar_analysis(x):
    """(H, W) with symmetric pad on odd extents -> (LL, LH, HL, HH)."""
    h, w = x.shape
    if h % 2:
        x = np.vstack([x, x[-1:]])
    if w % 2:
        x = np.hstack([x, x[:, -1:]])
    H, W = x.shape
    bands = np.zeros((4, H // 2, W // 2))
    for i in range(H // 2):
        for j in range(W // 2):
            a, b = x[2 * i, 2 * j], x[2 * i, 2 * j + 1]
            c, d = x[2 * i + 1, 2 * j], x[2 * i + 1, 2 * j + 1]
            bands[:, i, j] = ((a + b + c + d) / 2, (a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2)
    return bands


def haar_synthesis(bands, h, w):
    _, h2, w2 = bands.shape
    x = np.zeros((2 * h2, 2 * w2))
    for i in range(h2):
        for j in range(w2):
            ll, lh, hl, hh = bands[:, i, j]
            x[2 * i, 2 * j] = (ll + lh + hl + hh) / 2
            x[2 * i, 2 * j + 1] = (ll - lh + hl - hh) / 2
            x[2 * i + 1, 2 * j] = (ll + lh - hl - hh) / 2
            x[2 * i + 1, 2 * j + 1] = (ll - lh - hl + hh) / 2
    return x[:h, :w]


def gelu(x):
    return np.vectorize(lambda v: v * 0.5 * (1.0 + math.erf(v / math.sqrt(2.0))))(x)


def layer_norm(x, scale, shift, eps=1e-5):
    out = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(*x.shape[:-1]):
        row = x[idx]
        mu = math.fsum(row) / row.size
        var = math.fsum((row - mu) ** 2) / row.size
        out[idx] = (row - mu) / math.sqrt(var + eps) * scale + shift
    return out


def separable(plane, dw, db, pw, pb):
    y = conv2d_depthwise(plane[None], dw, db)
    return conv2d_pointwise(y, pw, pb)[0]


def wcp(x, weights):
    """weights: four (dw (1,3,3), db (1,), pw (1,1), pb (1,)) tuples in LL, LH, HL, HH order."""
    h, w = x.shape
    bands = haar_analysis(x)
    processed = np.stack([separable(bands[i], *weights[i]) for i in range(4)])
    return haar_synthesis(processed, h, w)


def msp(x):
    return (avg_pool(x, 3) + avg_pool(x, 5) + avg_pool(x, 7)) / 3.0


def gdfn(p, w):
    """w: dict of numpy arrays keyed like GdfnWeights fields."""
    def branch(i):
        h = p @ w[f"pw{i}_weight"] + w[f"pw{i}_bias"]
        return conv2d_depthwise(h[None], w[f"dw{i}_weight"], w[f"dw{i}_bias"])[0]

    gate = gelu(branch(1)) * branch(2)
    return gate @ w["pw0_weight"] + w["pw0_bias"] + p


def positional_encoding(m, k):
    pe = np.zeros((m, k))
    for t in range(m):
        for c in range(k):
            i = c // 2
            angle = t / 10000.0 ** (2 * i / k)
            pe[t, c] = math.sin(angle) if c % 2 == 0 else math.cos(angle)
    return pe
