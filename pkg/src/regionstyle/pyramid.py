"""Pyramid block statistics: per-branch block partitioning, block moments,
and alignment of the resulting coefficient grids to a target size.

Each branch splits a crop into a grid of blocks (floor-boundary tiling, so
blocks differ by at most one pixel per axis), takes per-block mean and
std = sqrt(biased variance + epsilon), then resizes both grids to the
target crop size. The symbolic level "half" resolves to ceil(dim / 2)
per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, _ops
from ._ops import PLAIN
from .tensor import FeatureMap

HALF = "half"

# level recipes: coarse-to-fine lists for plain vs detail-rich regions
BASIC_LEVELS = (1, HALF)
DETAIL_LEVELS = (1, 6, HALF)


def validate_level(level) -> None:
    if level == HALF:
        return
    if isinstance(level, (int, np.integer)) and not isinstance(level, bool):
        if level >= 1:
            return
    raise ValueError(f"pyramid level must be a positive int or {HALF!r}, got {level!r}")


def resolve_level(level, h_r: int, w_r: int) -> tuple[int, int]:
    """Resolve a nominal level to a per-axis block grid for an h_r x w_r crop.

    "half" becomes (ceil(h_r/2), ceil(w_r/2)); a fixed size clamps to the
    crop dims so the grid never exceeds them.
    """
    if h_r < 1 or w_r < 1:
        raise ValueError(f"crop dims must be positive, got {h_r}x{w_r}")
    validate_level(level)
    if level == HALF:
        return max(1, -(-h_r // 2)), max(1, -(-w_r // 2))
    n = int(level)
    return min(n, h_r), min(n, w_r)


def _moments(ops, x, grid, epsilon, weights=None):
    """Per-block (mean, sqrt(var + eps)) of x over the given grid.

    x may be an ndarray or a tape variable; weights is an optional
    constant (h, w) pixel weighting (used for masked statistics).
    """
    gh, gw = grid
    _, h, w = ops.value(x).shape
    if weights is None:
        counts = _ops.block_counts(h, w, gh, gw)
    else:
        counts = _kernels.block_sum(weights[None], gh, gw)[0]
    mean = ops.block_mean(x, grid, weights, counts)
    centered = ops.sub(x, ops.expand(mean, h, w))
    var = ops.block_mean(ops.mul(centered, centered), grid, weights, counts)
    return mean, ops.sqrt_plus(var, epsilon)


def level_stats(v: FeatureMap, grid: tuple[int, int], epsilon: float,
                region_mask: np.ndarray | None = None) -> tuple[FeatureMap, FeatureMap]:
    """Block mean and std over an exact tiling of v.

    Block (i, j) spans rows floor(i*h/gh) .. floor((i+1)*h/gh) and the
    analogous columns; every pixel lands in exactly one block. The std is
    sqrt(population variance + epsilon), hence >= sqrt(epsilon) always.

    With region_mask given, blocks average only the masked pixels; blocks
    containing none fall back to whole-block statistics.
    """
    gh, gw = grid
    if not (1 <= gh <= v.height and 1 <= gw <= v.width):
        raise ValueError(f"grid {grid} exceeds crop dims {v.height}x{v.width}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    weights = None if region_mask is None else effective_mask(region_mask, grid)
    mean, std = _moments(PLAIN, v.data, grid, epsilon, weights)
    return FeatureMap(mean), FeatureMap(std)


def effective_mask(binary_mask: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Per-pixel weights for masked block statistics.

    Equal to the binary mask except in blocks with no masked pixel, which
    revert to all-ones so their statistics stay defined.
    """
    bm = np.asarray(binary_mask, dtype=np.float64)
    gh, gw = grid
    h, w = bm.shape
    per_block = _kernels.block_sum(bm[None], gh, gw)[0]
    if (per_block > 0).all():
        return bm
    empty = (per_block == 0).astype(np.float64)
    empty_px = _kernels.block_expand(empty[None], h, w)[0]
    return np.where(empty_px > 0, 1.0, bm)


def align_params(rho: FeatureMap, tau: FeatureMap, h_t: int, w_t: int,
                 mode: str = "bilinear") -> tuple[FeatureMap, FeatureMap]:
    """Resize a (mean, std) grid pair to the target spatial size.

    The std map stays strictly positive: both resize modes produce convex
    combinations of the (positive) inputs.
    """
    if h_t < 1 or w_t < 1:
        raise ValueError(f"target dims must be positive, got {h_t}x{w_t}")
    return (FeatureMap(_ops.resize(rho.data, h_t, w_t, mode)),
            FeatureMap(_ops.resize(tau.data, h_t, w_t, mode)))


@dataclass(frozen=True)
class PyramidParams:
    """Per-branch statistics of one region crop.

    grids[k] is branch k's resolved block grid; block_means/block_stds are
    the unaligned (C, gh, gw) grids and aligned_means/aligned_stds their
    resized (C, h_t, w_t) versions.
    """

    levels: tuple
    grids: tuple[tuple[int, int], ...]
    block_means: tuple[FeatureMap, ...]
    block_stds: tuple[FeatureMap, ...]
    aligned_means: tuple[FeatureMap, ...]
    aligned_stds: tuple[FeatureMap, ...]

    @property
    def branches(self) -> int:
        return len(self.levels)


def pyramid_stats(v_r: FeatureMap, levels, epsilon: float, h_t: int, w_t: int,
                  resize_mode: str = "bilinear",
                  region_mask: np.ndarray | None = None) -> PyramidParams:
    """Run every branch independently: resolve grid, block moments, align."""
    levels = tuple(levels)
    if not levels:
        raise ValueError("at least one pyramid level is required")
    grids, bm, bs, am, asd = [], [], [], [], []
    for level in levels:
        grid = resolve_level(level, v_r.height, v_r.width)
        mean, std = level_stats(v_r, grid, epsilon, region_mask=region_mask)
        mean_t, std_t = align_params(mean, std, h_t, w_t, mode=resize_mode)
        grids.append(grid)
        bm.append(mean)
        bs.append(std)
        am.append(mean_t)
        asd.append(std_t)
    return PyramidParams(levels=levels, grids=tuple(grids),
                         block_means=tuple(bm), block_stds=tuple(bs),
                         aligned_means=tuple(am), aligned_stds=tuple(asd))
