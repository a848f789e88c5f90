"""Segmentation-mask geometry: region discovery, tight bounding-box crops,
and masked merge back into the full map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RegionNotFoundError
from .tensor import FeatureMap


class SegMask:
    """Immutable (H, W) label map; 0 is background, labels fit in 8 bits."""

    __slots__ = ("_labels",)

    def __init__(self, labels):
        arr = np.asarray(labels)
        if arr.ndim != 2:
            raise ValueError(f"mask needs 2 axes (height, width), got {arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"mask labels must be integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("mask labels must lie in 0..255")
        arr = arr.astype(np.uint8, copy=True)
        arr.setflags(write=False)
        self._labels = arr

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def height(self) -> int:
        return self._labels.shape[0]

    @property
    def width(self) -> int:
        return self._labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._labels.shape

    def __repr__(self):
        return f"SegMask(height={self.height}, width={self.width})"


@dataclass(frozen=True)
class RegionCrop:
    """A region's tight bounding-box crop.

    feature: the (C, h_r, w_r) sub-tensor under the bbox
    bbox: (row0, col0, h_r, w_r) in parent coordinates
    binary_mask: (h_r, w_r) uint8 map, 1 on region pixels
    """

    feature: FeatureMap
    bbox: tuple[int, int, int, int]
    binary_mask: np.ndarray
    region_id: int

    def __post_init__(self):
        bm = np.asarray(self.binary_mask)
        if bm.shape != (self.feature.height, self.feature.width):
            raise ValueError("binary_mask shape does not match the cropped feature")
        if not bm.any():
            raise ValueError("binary_mask must contain at least one region pixel")
        if not (bm[0].any() and bm[-1].any() and bm[:, 0].any() and bm[:, -1].any()):
            raise ValueError("bbox is not tight around the region pixels")
        bm = bm.astype(np.uint8, copy=True)
        bm.setflags(write=False)
        object.__setattr__(self, "binary_mask", bm)


def region_set(mask: SegMask) -> list[int]:
    """Distinct nonzero labels present in the mask, ascending."""
    labels = np.unique(mask.labels)
    return [int(v) for v in labels if v != 0]


def region_bbox_crop(feat: FeatureMap, mask: SegMask, region_id: int) -> RegionCrop:
    """Crop the tight axis-aligned bounding rectangle of a region.

    Raises RegionNotFoundError when region_id has no pixels in the mask.
    """
    if (feat.height, feat.width) != mask.shape:
        raise ValueError(
            f"feature {feat.height}x{feat.width} and mask {mask.shape} disagree")
    if region_id == 0:
        raise ValueError("region id 0 is reserved for background")
    hit = mask.labels == region_id
    rows = np.flatnonzero(hit.any(axis=1))
    if rows.size == 0:
        raise RegionNotFoundError(f"region {region_id} not present in mask")
    cols = np.flatnonzero(hit.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    bbox = (r0, c0, r1 - r0 + 1, c1 - c0 + 1)
    sub = feat.data[:, r0:r1 + 1, c0:c1 + 1]
    return RegionCrop(
        feature=FeatureMap(sub),
        bbox=bbox,
        binary_mask=hit[r0:r1 + 1, c0:c1 + 1],
        region_id=int(region_id),
    )


def merge_region(base: FeatureMap, patch: FeatureMap, crop: RegionCrop) -> FeatureMap:
    """Write patch values onto base at the crop's masked pixels.

    Pixels outside the bbox, or inside it where binary_mask is 0, keep
    base's values bitwise. base itself is never mutated.
    """
    r0, c0, h, w = crop.bbox
    if patch.shape != (base.channels, h, w):
        raise ValueError(
            f"patch shape {patch.shape} does not match crop {base.channels}x{h}x{w}")
    if r0 + h > base.height or c0 + w > base.width:
        raise ValueError("crop bbox exceeds the base map bounds")
    out = base.to_array()
    inside = crop.binary_mask.astype(bool)
    view = out[:, r0:r0 + h, c0:c0 + w]
    view[:, inside] = patch.data[:, inside]
    return FeatureMap(out)
