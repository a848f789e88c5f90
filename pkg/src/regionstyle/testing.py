"""Seeded random instance generators for the invariant suite, the gradient
checks, and the test suite. Everything is a pure function of the supplied
Generator, so instances are reproducible."""

from __future__ import annotations

import numpy as np

from .gates import SCALAR, SPATIAL, random_gates, uniform_gates
from .masks import SegMask
from .pyramid import HALF
from .tensor import FeatureMap
from .transfer import RegionSpec, TransferConfig

# level lists by branch count; fixed sizes clamp on small crops
LEVEL_CHOICES = {
    1: (1,),
    2: (1, HALF),
    3: (1, 6, HALF),
}


def random_map(rng: np.random.Generator, channels: int, h: int, w: int,
               loc: float = 0.0, scale: float = 1.0) -> FeatureMap:
    return FeatureMap(rng.normal(loc, scale, (channels, h, w)))


def random_mask(rng: np.random.Generator, h: int, w: int, region_ids,
                min_size: int = 2) -> SegMask:
    """Disjoint regions, one per id, each a rectangle in its own vertical
    band (optionally with a punched-out interior for irregular shapes).

    Rectangles are at least min_size x min_size (needs h >= min_size and
    w >= min_size * n_regions). Single-pixel regions are a deterministic
    edge case for unit tests; random crops stay at 2x2+ so gradients do
    not vanish identically, and gradient checks use 3x3+ so no two
    pyramid grids coincide (coinciding branches have mathematically-zero
    gate gradients whose finite-difference noise would swamp a
    relative-error comparison).
    """
    region_ids = list(region_ids)
    if h < min_size or w < min_size * len(region_ids):
        raise ValueError(f"need h >= {min_size} and w >= "
                         f"{min_size * len(region_ids)} for "
                         f"{len(region_ids)} regions, got {h}x{w}")
    labels = np.zeros((h, w), dtype=np.uint8)
    bands = np.array_split(np.arange(w), len(region_ids))
    for rid, band in zip(region_ids, bands):
        c_lo, c_hi = int(band[0]), int(band[-1])
        c0 = int(rng.integers(c_lo, c_hi - min_size + 2))
        c1 = int(rng.integers(c0 + min_size - 1, c_hi + 1))
        r0 = int(rng.integers(0, h - min_size + 1))
        r1 = int(rng.integers(r0 + min_size - 1, h))
        labels[r0:r1 + 1, c0:c1 + 1] = rid
        # punch a hole strictly inside so binary masks are not all-ones,
        # keeping the bounding box tight
        if r1 - r0 >= 2 and c1 - c0 >= 2 and rng.random() < 0.5:
            labels[r0 + 1:r1, c0 + 1:c1] = 0
    return SegMask(labels)


def random_mask_pair(rng: np.random.Generator, h: int, w: int, region_ids,
                     min_size: int = 2) -> tuple[SegMask, SegMask]:
    return (random_mask(rng, h, w, region_ids, min_size),
            random_mask(rng, h, w, region_ids, min_size))


def make_config(region_ids, branch_counts, gate_mode: str = SCALAR,
                epsilon: float = 1e-5, resize_mode: str = "bilinear",
                masked_stats: bool = False) -> TransferConfig:
    regions = {}
    for rid, k in zip(region_ids, branch_counts):
        regions[int(rid)] = RegionSpec(name=f"region-{rid}",
                                       levels=LEVEL_CHOICES[k])
    return TransferConfig(regions=regions, epsilon=epsilon,
                          resize_mode=resize_mode, gate_mode=gate_mode,
                          masked_stats=masked_stats)


def make_transfer_instance(rng: np.random.Generator, channels: int = 3,
                           h: int = 12, w: int = 12, n_regions: int = 2,
                           branch_counts=None, gate_mode: str = SCALAR,
                           gate_scale: float = 0.0, min_region: int = 2) -> dict:
    """A full random transfer problem. gate_scale 0 means zero gates."""
    region_ids = list(range(1, n_regions + 1))
    if branch_counts is None:
        branch_counts = [int(rng.integers(1, 4)) for _ in region_ids]
    config = make_config(region_ids, branch_counts, gate_mode=gate_mode)
    f = random_map(rng, channels, h, w)
    v = random_map(rng, channels, h, w)
    mask_f, mask_v = random_mask_pair(rng, h, w, region_ids, min_region)
    if gate_scale > 0.0:
        gates = random_gates(config.branch_counts(), channels, gate_mode,
                             rng, gate_scale)
    else:
        gates = uniform_gates(config.branch_counts(), channels, gate_mode)
    return {"f": f, "v": v, "mask_f": mask_f, "mask_v": mask_v,
            "config": config, "gates": gates}


def make_gradcheck_instance(rng: np.random.Generator, trial: int) -> dict:
    """Small random instance for finite-difference checks.

    Cycles through gate modes and branch counts with the trial index so a
    short run still covers scalar/spatial gates and K in {1, 2, 3}.
    """
    channels = 1 + trial % 2
    gate_mode = SCALAR if trial % 2 == 0 else SPATIAL
    n_regions = 1 + trial % 2
    h = int(rng.integers(6, 10))
    w = int(rng.integers(3 * n_regions, 10))
    ks = [1 + (trial + i) % 3 for i in range(n_regions)]
    inst = make_transfer_instance(rng, channels=channels, h=h, w=w,
                                  n_regions=n_regions, branch_counts=ks,
                                  gate_mode=gate_mode, gate_scale=0.1,
                                  min_region=3)
    inst["upstream"] = random_map(rng, channels, h, w)
    return inst
