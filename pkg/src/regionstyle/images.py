"""PNG loading/saving for the CLI: 8-bit RGB images as [0, 1] float maps
and 8-bit grayscale masks whose pixel value is the region label."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .masks import SegMask
from .tensor import FeatureMap


def load_rgb(path) -> FeatureMap:
    """Read an 8-bit RGB PNG into a (3, H, W) map scaled to [0, 1]."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected an 8-bit RGB image, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.uint8)
    return FeatureMap(arr.transpose(2, 0, 1).astype(np.float64) / 255.0)


def load_mask(path) -> SegMask:
    """Read an 8-bit single-channel PNG label map (0 = background)."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(
                f"{path}: expected an 8-bit grayscale mask, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.uint8)
    return SegMask(arr)


def save_rgb(fm: FeatureMap, path) -> None:
    """Quantize a (3, H, W) [0, 1] map to 8-bit RGB and write atomically.

    The image is written to a sibling temp file and renamed into place, so
    a failure never leaves a partial file at the target path.
    """
    if fm.channels != 3:
        raise ValueError(f"need 3 channels to write RGB, got {fm.channels}")
    arr = np.rint(np.clip(fm.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    img = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    tmp = f"{path}.part"
    try:
        img.save(tmp, format="PNG")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def save_mask(mask: SegMask, path) -> None:
    img = Image.fromarray(mask.labels, mode="L")
    tmp = f"{path}.part"
    try:
        img.save(tmp, format="PNG")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def quantize(fm: FeatureMap) -> np.ndarray:
    """The exact 8-bit quantization save_rgb applies, for comparisons."""
    return np.rint(np.clip(fm.data, 0.0, 1.0) * 255.0).astype(np.uint8)
