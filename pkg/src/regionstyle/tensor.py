"""Dense feature-map value type and the core array operations.

A FeatureMap is an immutable channels x height x width float64 tensor.
All operations are pure functions returning new maps; finiteness is
checked on every construction, so no op can silently produce NaN/Inf.
"""

from __future__ import annotations

import numpy as np

from . import _ops


class FeatureMap:
    """Immutable (C, H, W) float64 tensor.

    Construction copies the input, coerces to float64 and rejects empty
    or non-finite data. The underlying array is read-only; use
    ``to_array()`` for a writable copy.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(
                f"feature map needs 3 axes (channels, height, width), got {arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"feature map dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature map contains non-finite values")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def full(cls, channels: int, height: int, width: int, value: float) -> "FeatureMap":
        return cls(np.full((channels, height, width), float(value)))

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying (C, H, W) array."""
        return self._data

    @property
    def channels(self) -> int:
        return self._data.shape[0]

    @property
    def height(self) -> int:
        return self._data.shape[1]

    @property
    def width(self) -> int:
        return self._data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    def to_array(self) -> np.ndarray:
        return self._data.copy()

    def __repr__(self):
        c, h, w = self._data.shape
        return f"FeatureMap(channels={c}, height={h}, width={w})"


def resize_bilinear(src: FeatureMap, out_h: int, out_w: int) -> FeatureMap:
    """Resample to (out_h, out_w) with half-pixel-center bilinear sampling.

    The source coordinate of output index i is (i + 0.5) * in/out - 0.5,
    clamped to the valid range. Resizing to the input shape is an exact
    identity, and constant maps stay exactly constant.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be positive, got {out_h}x{out_w}")
    return FeatureMap(_ops.resize(src.data, out_h, out_w, "bilinear"))


def resize_nearest(src: FeatureMap, out_h: int, out_w: int) -> FeatureMap:
    """Nearest-neighbor resample with the same coordinate convention."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be positive, got {out_h}x{out_w}")
    return FeatureMap(_ops.resize(src.data, out_h, out_w, "nearest"))


def softmax_channels(x: FeatureMap) -> FeatureMap:
    """Exp-normalize over the channel axis at each spatial location.

    Max-subtracted for stability; every location sums to 1 within 1e-12.
    """
    return FeatureMap(_ops.softmax_map(x.data))


def conv2d_3x3(x: FeatureMap, kernel: np.ndarray, bias: np.ndarray | None = None) -> FeatureMap:
    """Stride-1, zero-padded 3x3 cross-correlation plus bias.

    kernel: (out_channels, in_channels, 3, 3); bias: (out_channels,) or None.
    Output has the input's spatial dims.
    """
    kern = np.asarray(kernel, dtype=np.float64)
    if kern.ndim != 4 or kern.shape[2:] != (3, 3):
        raise ValueError(f"kernel must have shape (K, C, 3, 3), got {kern.shape}")
    if kern.shape[1] != x.channels:
        raise ValueError(
            f"kernel expects {kern.shape[1]} input channels, map has {x.channels}")
    if bias is None:
        b = np.zeros(kern.shape[0])
    else:
        b = np.asarray(bias, dtype=np.float64)
        if b.shape != (kern.shape[0],):
            raise ValueError(f"bias must have shape ({kern.shape[0]},), got {b.shape}")
    return FeatureMap(_ops.conv3x3(x.data, kern, b))


def concat_channels(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    """Stack b's channels after a's. Operand order is significant."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"spatial dims differ: {a.height}x{a.width} vs {b.height}x{b.width}")
    return FeatureMap(np.concatenate([a.data, b.data], axis=0))


def global_mean(x: FeatureMap) -> np.ndarray:
    """Per-channel arithmetic mean over all spatial positions, shape (C,)."""
    return _ops.global_mean(x.data)
