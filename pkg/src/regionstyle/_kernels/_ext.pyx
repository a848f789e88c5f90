# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: 3x3 convolution, bilinear resample, block moments.

Same contracts as regionstyle._kernels._fallback.
"""

import numpy as np


def conv3x3(const double[:, :, ::1] x, const double[:, :, :, ::1] w, const double[::1] b):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t K = w.shape[0]
    out_arr = np.empty((K, H, W), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, ci, y, xc, ky, kx, iy, ix
    cdef double acc
    for k in range(K):
        for y in range(H):
            for xc in range(W):
                acc = b[k]
                for ci in range(C):
                    for ky in range(3):
                        iy = y + ky - 1
                        if iy < 0 or iy >= H:
                            continue
                        for kx in range(3):
                            ix = xc + kx - 1
                            if ix < 0 or ix >= W:
                                continue
                            acc += w[k, ci, ky, kx] * x[ci, iy, ix]
                out[k, y, xc] = acc
    return out_arr


def bilinear_resize(const double[:, :, ::1] x, Py_ssize_t oh, Py_ssize_t ow):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    if oh == H and ow == W:
        return np.asarray(x).copy()
    out_arr = np.empty((C, oh, ow), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double scale_y = H / <double> oh
    cdef double scale_x = W / <double> ow
    cdef Py_ssize_t c, oy, ox, y0, y1, x0, x1
    cdef double sy, sx, fy, fx, top, bot
    for oy in range(oh):
        sy = (oy + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > H - 1:
            sy = H - 1
        y0 = <Py_ssize_t> sy
        fy = sy - y0
        y1 = y0 + 1
        if y1 > H - 1:
            y1 = H - 1
        for ox in range(ow):
            sx = (ox + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > W - 1:
                sx = W - 1
            x0 = <Py_ssize_t> sx
            fx = sx - x0
            x1 = x0 + 1
            if x1 > W - 1:
                x1 = W - 1
            for c in range(C):
                top = x[c, y0, x0] + fx * (x[c, y0, x1] - x[c, y0, x0])
                bot = x[c, y1, x0] + fx * (x[c, y1, x1] - x[c, y1, x0])
                out[c, oy, ox] = top + fy * (bot - top)
    return out_arr


def bilinear_resize_adjoint(const double[:, :, ::1] u, Py_ssize_t ih, Py_ssize_t iw):
    cdef Py_ssize_t C = u.shape[0], OH = u.shape[1], OW = u.shape[2]
    if OH == ih and OW == iw:
        return np.asarray(u).copy()
    out_arr = np.zeros((C, ih, iw), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double scale_y = ih / <double> OH
    cdef double scale_x = iw / <double> OW
    cdef Py_ssize_t c, oy, ox, y0, y1, x0, x1
    cdef double sy, sx, fy, fx, g
    for oy in range(OH):
        sy = (oy + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > ih - 1:
            sy = ih - 1
        y0 = <Py_ssize_t> sy
        fy = sy - y0
        y1 = y0 + 1
        if y1 > ih - 1:
            y1 = ih - 1
        for ox in range(OW):
            sx = (ox + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > iw - 1:
                sx = iw - 1
            x0 = <Py_ssize_t> sx
            fx = sx - x0
            x1 = x0 + 1
            if x1 > iw - 1:
                x1 = iw - 1
            for c in range(C):
                g = u[c, oy, ox]
                out[c, y0, x0] += g * (1.0 - fy) * (1.0 - fx)
                out[c, y0, x1] += g * (1.0 - fy) * fx
                out[c, y1, x0] += g * fy * (1.0 - fx)
                out[c, y1, x1] += g * fy * fx
    return out_arr


def block_sum(const double[:, :, ::1] x, Py_ssize_t gh, Py_ssize_t gw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    out_arr = np.empty((C, gh, gw), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, i, j, y, xc, r0, r1, c0, c1
    cdef double acc
    for c in range(C):
        for i in range(gh):
            r0 = (i * H) // gh
            r1 = ((i + 1) * H) // gh
            for j in range(gw):
                c0 = (j * W) // gw
                c1 = ((j + 1) * W) // gw
                acc = 0.0
                for y in range(r0, r1):
                    for xc in range(c0, c1):
                        acc += x[c, y, xc]
                out[c, i, j] = acc
    return out_arr


def block_expand(const double[:, :, ::1] m, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t C = m.shape[0], GH = m.shape[1], GW = m.shape[2]
    out_arr = np.empty((C, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, i, j, y, xc, r0, r1, c0, c1
    cdef double v
    for c in range(C):
        for i in range(GH):
            r0 = (i * h) // GH
            r1 = ((i + 1) * h) // GH
            for j in range(GW):
                c0 = (j * w) // GW
                c1 = ((j + 1) * w) // GW
                v = m[c, i, j]
                for y in range(r0, r1):
                    for xc in range(c0, c1):
                        out[c, y, xc] = v
    return out_arr
