"""Kernel backend selection.

The compiled Cython extension is used when it was built; otherwise the
numpy fallback takes over. REGIONSTYLE_PURE=1 forces the fallback. Both
backends are deterministic and agree to ~1e-15; the callers never depend
on which one is active.
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("REGIONSTYLE_PURE", "") not in ("", "0"):
    _impl = _fallback
    _BACKEND = "numpy"
else:
    try:
        from . import _ext as _impl
        _BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        _BACKEND = "numpy"


def backend():
    """Name of the active kernel backend: 'compiled' or 'numpy'."""
    return _BACKEND


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv3x3(x, w, b):
    return _impl.conv3x3(_c(x), _c(w), _c(b))


def bilinear_resize(x, oh, ow):
    return _impl.bilinear_resize(_c(x), oh, ow)


def bilinear_resize_adjoint(u, ih, iw):
    return _impl.bilinear_resize_adjoint(_c(u), ih, iw)


def block_sum(x, gh, gw):
    return _impl.block_sum(_c(x), gh, gw)


def block_expand(m, h, w):
    return _impl.block_expand(_c(m), h, w)
