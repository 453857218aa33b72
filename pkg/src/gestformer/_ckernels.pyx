# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sliding-window kernels. Mirrors ``_pykernels`` exactly."""

import numpy as np


def dwconv2d_forward(const double[:, :, :, ::1] x, const double[:, :, ::1] w):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    out = np.zeros((N, C, H, W))
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t n, c, i, j, u, v, du, dv, i0, i1, j0, j1
    cdef double wt
    with nogil:
        for n in range(N):
            for c in range(C):
                # taps outermost; clipped ranges keep the inner loop branch-free
                for u in range(kh):
                    du = u - ph
                    i0 = -du if du < 0 else 0
                    i1 = H - du if du > 0 else H
                    for v in range(kw):
                        dv = v - pw
                        j0 = -dv if dv < 0 else 0
                        j1 = W - dv if dv > 0 else W
                        wt = w[c, u, v]
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                o[n, c, i, j] += wt * x[n, c, i + du, j + dv]
    return out


def dwconv2d_backward(const double[:, :, :, ::1] x, const double[:, :, ::1] w,
                      const double[:, :, :, ::1] g):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    gx_arr = np.zeros((N, C, H, W))
    gw_arr = np.zeros((C, kh, kw))
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef Py_ssize_t n, c, i, j, u, v, du, dv, i0, i1, j0, j1
    cdef double wt, acc
    with nogil:
        for n in range(N):
            for c in range(C):
                for u in range(kh):
                    du = u - ph
                    i0 = -du if du < 0 else 0
                    i1 = H - du if du > 0 else H
                    for v in range(kw):
                        dv = v - pw
                        j0 = -dv if dv < 0 else 0
                        j1 = W - dv if dv > 0 else W
                        wt = w[c, u, v]
                        acc = 0.0
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                gx[n, c, i + du, j + dv] += wt * g[n, c, i, j]
                                acc = acc + g[n, c, i, j] * x[n, c, i + du, j + dv]
                        gw[c, u, v] += acc
    return gx_arr, gw_arr


cdef void _box_sum(const double[:, :, ::1] x, Py_ssize_t k, double[:, :, ::1] rows,
                   double[:, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t r = k // 2
    cdef Py_ssize_t n, i, j, t, lo, hi
    cdef double acc
    for n in range(N):
        for i in range(H):
            for j in range(W):
                lo = j - r if j - r > 0 else 0
                hi = j + r if j + r < W - 1 else W - 1
                acc = 0.0
                for t in range(lo, hi + 1):
                    acc = acc + x[n, i, t]
                rows[n, i, j] = acc
        for i in range(H):
            lo = i - r if i - r > 0 else 0
            hi = i + r if i + r < H - 1 else H - 1
            for j in range(W):
                acc = 0.0
                for t in range(lo, hi + 1):
                    acc = acc + rows[n, t, j]
                out[n, i, j] = acc


cdef inline double _count(Py_ssize_t i, Py_ssize_t length, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t lo = i - r if i - r > 0 else 0
    cdef Py_ssize_t hi = i + r if i + r < length - 1 else length - 1
    return <double>(hi - lo + 1)


def avgpool2d_forward(const double[:, :, ::1] x, Py_ssize_t k):
    cdef Py_ssize_t N = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t r = k // 2
    out_arr = np.empty((N, H, W))
    rows_arr = np.empty((N, H, W))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] rows = rows_arr
    cdef Py_ssize_t n, i, j
    _box_sum(x, k, rows, out)
    for n in range(N):
        for i in range(H):
            for j in range(W):
                out[n, i, j] = out[n, i, j] / (_count(i, H, r) * _count(j, W, r))
    return out_arr


def avgpool2d_backward(const double[:, :, ::1] g, Py_ssize_t k):
    cdef Py_ssize_t N = g.shape[0], H = g.shape[1], W = g.shape[2]
    cdef Py_ssize_t r = k // 2
    scaled_arr = np.empty((N, H, W))
    rows_arr = np.empty((N, H, W))
    out_arr = np.empty((N, H, W))
    cdef double[:, :, ::1] scaled = scaled_arr
    cdef double[:, :, ::1] rows = rows_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t n, i, j
    for n in range(N):
        for i in range(H):
            for j in range(W):
                scaled[n, i, j] = g[n, i, j] / (_count(i, H, r) * _count(j, W, r))
    _box_sum(scaled, k, rows, out)
    return out_arr


def haar_forward(const double[:, :, ::1] x):
    cdef Py_ssize_t N = x.shape[0], h = x.shape[1] // 2, w = x.shape[2] // 2
    out_arr = np.empty((4, N, h, w))
    cdef double[:, :, :, ::1] o = out_arr
    cdef Py_ssize_t n, i, j
    cdef double a, b, c, d
    for n in range(N):
        for i in range(h):
            for j in range(w):
                a = x[n, 2 * i, 2 * j]
                b = x[n, 2 * i, 2 * j + 1]
                c = x[n, 2 * i + 1, 2 * j]
                d = x[n, 2 * i + 1, 2 * j + 1]
                o[0, n, i, j] = (a + b + c + d) * 0.5
                o[1, n, i, j] = (a - b + c - d) * 0.5
                o[2, n, i, j] = (a + b - c - d) * 0.5
                o[3, n, i, j] = (a - b - c + d) * 0.5
    return out_arr


def haar_inverse(const double[:, :, :, ::1] s):
    cdef Py_ssize_t N = s.shape[1], h = s.shape[2], w = s.shape[3]
    out_arr = np.empty((N, 2 * h, 2 * w))
    cdef double[:, :, ::1] o = out_arr
    cdef Py_ssize_t n, i, j
    cdef double ll, lh, hl, hh
    for n in range(N):
        for i in range(h):
            for j in range(w):
                ll = s[0, n, i, j]
                lh = s[1, n, i, j]
                hl = s[2, n, i, j]
                hh = s[3, n, i, j]
                o[n, 2 * i, 2 * j] = (ll + lh + hl + hh) * 0.5
                o[n, 2 * i, 2 * j + 1] = (ll - lh + hl - hh) * 0.5
                o[n, 2 * i + 1, 2 * j] = (ll + lh - hl - hh) * 0.5
                o[n, 2 * i + 1, 2 * j + 1] = (ll - lh - hl + hh) * 0.5
    return out_arr
