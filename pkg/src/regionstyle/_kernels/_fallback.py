"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or REGIONSTYLE_PURE=1).
Accumulation orders are chosen to track the compiled loops: conv3x3 adds
tap contributions in (in-channel, ky, kx) order and the resize kernels use
the identical half-pixel-center coordinate arithmetic, so the two backends
agree bitwise for those ops and to ~1e-15 for the block reductions.
"""

import numpy as np


def _axis_coords(n_in, n_out):
    """Bilinear source coordinates for one axis: (i0, i1, frac)."""
    scale = n_in / n_out
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    s = np.clip(s, 0.0, float(n_in - 1))
    i0 = np.floor(s).astype(np.intp)
    frac = s - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, frac


def conv3x3(x, w, b):
    """Zero-padded stride-1 3x3 cross-correlation plus bias.

    x: (C, H, W), w: (K, C, 3, 3), b: (K,) -> (K, H, W)
    """
    c, h, wd = x.shape
    k = w.shape[0]
    xp = np.zeros((c, h + 2, wd + 2))
    xp[:, 1:-1, 1:-1] = x
    out = np.empty((k, h, wd))
    out[:] = b[:, None, None]
    for ci in range(c):
        for ky in range(3):
            for kx in range(3):
                out += w[:, ci, ky, kx, None, None] * xp[ci, ky:ky + h, kx:kx + wd]
    return out


def bilinear_resize(x, oh, ow):
    """Half-pixel-center bilinear resample of (C, H, W) to (C, oh, ow)."""
    c, h, w = x.shape
    if oh == h and ow == w:
        return x.copy()
    y0, y1, fy = _axis_coords(h, oh)
    x0, x1, fx = _axis_coords(w, ow)
    p00 = x[:, y0][:, :, x0]
    p01 = x[:, y0][:, :, x1]
    p10 = x[:, y1][:, :, x0]
    p11 = x[:, y1][:, :, x1]
    fxb = fx[None, None, :]
    fyb = fy[None, :, None]
    # lerp form a + f*(b - a) keeps constant inputs exactly constant
    top = p00 + fxb * (p01 - p00)
    bot = p10 + fxb * (p11 - p10)
    return top + fyb * (bot - top)


def bilinear_resize_adjoint(u, ih, iw):
    """Transpose of bilinear_resize: scatter (C, oh, ow) back to (C, ih, iw)."""
    c, oh, ow = u.shape
    if oh == ih and ow == iw:
        return u.copy()
    y0, y1, fy = _axis_coords(ih, oh)
    x0, x1, fx = _axis_coords(iw, ow)
    wy0 = 1.0 - fy
    wx0 = 1.0 - fx
    corners = (
        (y0, x0, wy0[:, None] * wx0[None, :]),
        (y0, x1, wy0[:, None] * fx[None, :]),
        (y1, x0, fy[:, None] * wx0[None, :]),
        (y1, x1, fy[:, None] * fx[None, :]),
    )
    out = np.empty((c, ih, iw))
    for ci in range(c):
        acc = np.zeros(ih * iw)
        for ys, xs, wgt in corners:
            flat = (ys[:, None] * iw + xs[None, :]).ravel()
            acc += np.bincount(flat, weights=(u[ci] * wgt).ravel(),
                               minlength=ih * iw)
        out[ci] = acc.reshape(ih, iw)
    return out


def block_sum(x, gh, gw):
    """Sum of (C, H, W) over a gh x gw tiling with floor-boundary edges."""
    h, w = x.shape[1], x.shape[2]
    er = (np.arange(gh + 1) * h) // gh
    ec = (np.arange(gw + 1) * w) // gw
    rows = np.add.reduceat(x, er[:-1], axis=1)
    return np.add.reduceat(rows, ec[:-1], axis=2)


def block_expand(m, h, w):
    """Broadcast per-block values (C, gh, gw) back to pixels (C, h, w)."""
    gh, gw = m.shape[1], m.shape[2]
    er = (np.arange(gh + 1) * h) // gh
    ec = (np.arange(gw + 1) * w) // gw
    row_ids = np.repeat(np.arange(gh), np.diff(er))
    col_ids = np.repeat(np.arange(gw), np.diff(ec))
    return m[:, row_ids][:, :, col_ids]
