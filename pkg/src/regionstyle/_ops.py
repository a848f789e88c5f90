"""Array-level primitives shared by the public ops, the transfer pipeline,
and the reverse-mode tape.

Everything here operates on plain float64 ndarrays with (C, H, W) layout.
PlainOps exposes the same ops as the tape in regionstyle.autodiff, so the
pipeline is written once and runs identically with or without gradients.
"""

import numpy as np

from . import _kernels


def block_edges(n, g):
    """Tile boundaries for splitting n pixels into g blocks (len g+1)."""
    return (np.arange(g + 1) * n) // g


def block_counts(h, w, gh, gw):
    """Pixel count per block, shape (gh, gw)."""
    rows = np.diff(block_edges(h, gh))
    cols = np.diff(block_edges(w, gw))
    return (rows[:, None] * cols[None, :]).astype(np.float64)


def _nearest_indices(n_in, n_out):
    scale = n_in / n_out
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    s = np.clip(s, 0.0, float(n_in - 1))
    return np.minimum(np.floor(s + 0.5).astype(np.intp), n_in - 1)


def nearest_resize(x, oh, ow):
    h, w = x.shape[1], x.shape[2]
    if oh == h and ow == w:
        return x.copy()
    yi = _nearest_indices(h, oh)
    xi = _nearest_indices(w, ow)
    return x[:, yi][:, :, xi]


def nearest_resize_adjoint(u, ih, iw):
    c, oh, ow = u.shape
    if oh == ih and ow == iw:
        return u.copy()
    yi = _nearest_indices(ih, oh)
    xi = _nearest_indices(iw, ow)
    flat = (yi[:, None] * iw + xi[None, :]).ravel()
    out = np.empty((c, ih, iw))
    for ci in range(c):
        out[ci] = np.bincount(flat, weights=u[ci].ravel(),
                              minlength=ih * iw).reshape(ih, iw)
    return out


def resize(x, oh, ow, mode):
    if mode == "bilinear":
        return _kernels.bilinear_resize(x, oh, ow)
    if mode == "nearest":
        return nearest_resize(x, oh, ow)
    raise ValueError(f"unknown resize mode {mode!r}")


def resize_adjoint(u, ih, iw, mode):
    if mode == "bilinear":
        return _kernels.bilinear_resize_adjoint(u, ih, iw)
    if mode == "nearest":
        return nearest_resize_adjoint(u, ih, iw)
    raise ValueError(f"unknown resize mode {mode!r}")


def conv3x3(x, kern, bias):
    return _kernels.conv3x3(x, kern, bias)


def conv3x3_input_vjp(u, kern):
    # transpose of the forward map: correlate upstream with the kernel
    # flipped in both spatial taps and swapped in/out channels
    kt = np.ascontiguousarray(kern[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return _kernels.conv3x3(u, kt, np.zeros(kern.shape[1]))


def conv3x3_kernel_vjp(u, x):
    k, h, w = u.shape
    c = x.shape[0]
    xp = np.zeros((c, h + 2, w + 2))
    xp[:, 1:-1, 1:-1] = x
    dw = np.empty((k, c, 3, 3))
    for ky in range(3):
        for kx in range(3):
            dw[:, :, ky, kx] = np.einsum("khw,chw->kc", u,
                                         xp[:, ky:ky + h, kx:kx + w])
    return dw


def softmax_vec(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_map(z):
    e = np.exp(z - z.max(axis=0))
    return e / e.sum(axis=0)


def global_mean(x):
    return x.mean(axis=(1, 2))


class PlainOps:
    """Ops protocol over raw ndarrays (the no-gradient fast path)."""

    def leaf(self, x):
        return np.asarray(x, dtype=np.float64)

    def value(self, x):
        return x

    def crop(self, x, bbox):
        r0, c0, h, w = bbox
        return np.ascontiguousarray(x[:, r0:r0 + h, c0:c0 + w])

    def merge(self, base, patch, bbox, inside):
        r0, c0, h, w = bbox
        out = base.copy()
        view = out[:, r0:r0 + h, c0:c0 + w]
        view[:, inside] = patch[:, inside]
        return out

    def block_mean(self, x, grid, weights, counts):
        gh, gw = grid
        src = x if weights is None else x * weights[None]
        return _kernels.block_sum(src, gh, gw) / counts

    def expand(self, m, h, w):
        return _kernels.block_expand(m, h, w)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def sqrt_plus(self, x, c):
        return np.sqrt(x + c)

    def resize(self, x, oh, ow, mode):
        return resize(x, oh, ow, mode)

    def concat(self, a, b):
        return np.concatenate([a, b], axis=0)

    def conv3x3(self, x, kern, bias):
        return conv3x3(x, kern, bias)

    def global_mean(self, x):
        return global_mean(x)

    def softmax_vec(self, z):
        return softmax_vec(z)

    def softmax_map(self, z):
        return softmax_map(z)

    def wsum_scalar(self, wv, maps):
        out = wv[0] * maps[0]
        for k in range(1, len(maps)):
            out = out + wv[k] * maps[k]
        return out

    def wsum_spatial(self, wm, maps):
        out = wm[0][None] * maps[0]
        for k in range(1, len(maps)):
            out = out + wm[k][None] * maps[k]
        return out


PLAIN = PlainOps()
