"""Net-free loss formulas and the histogram-based region distance metric.

All functions are pure and operate on supplied tensors; no networks are
involved. Feature-space losses take precomputed feature lists. Reductions
are documented per function since the underlying norms come unnormalized.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import RegionNotFoundError
from .masks import SegMask, region_set
from .tensor import FeatureMap

HIST_BINS = 256  # histogram-matching resolution over [0, 1]
PFDM_BINS = 32   # per-part color histogram resolution

# documented total-loss trade-off weights for the makeup-transfer recipe
# (no training happens in this library; exposed for reference only)
TRADEOFF_WEIGHTS = {
    "adversarial": 1.0,
    "makeup": 1.0,
    "perceptual": 10.0,
    "cycle": 10.0,
}


def _bin_index(values: np.ndarray, bins: int) -> np.ndarray:
    # values nominally in [0, 1]; outliers clamp into the edge bins
    idx = np.floor(values * bins).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def _as_bool_mask(mask, shape, name):
    m = np.asarray(mask)
    if m.shape != shape:
        raise ValueError(f"{name} shape {m.shape} does not match image {shape}")
    return m.astype(bool)


def histogram_match(src: FeatureMap, ref: FeatureMap, src_mask, ref_mask) -> FeatureMap:
    """Per-channel CDF matching of a masked region.

    The reference CDF uses 256 bins over [0, 1]. Each source pixel's
    quantile is its exact empirical rank (bin-level CDF refined by
    within-bin rank, so pixels sharing a bin still spread over the
    reference distribution); the pixel maps to the first reference bin
    whose CDF reaches that quantile and takes the smallest reference
    value in it. Hence constant references reproduce exactly, and for
    equal pixel counts the sorted outputs pair with the sorted reference
    values to within one bin width. Pixels outside src_mask pass through
    bitwise.
    """
    sm = _as_bool_mask(src_mask, (src.height, src.width), "src_mask")
    rm = _as_bool_mask(ref_mask, (ref.height, ref.width), "ref_mask")
    if src.channels != ref.channels:
        raise ValueError(f"channel mismatch: {src.channels} vs {ref.channels}")
    if not sm.any():
        raise ValueError("src_mask selects no pixels")
    if not rm.any():
        raise ValueError("ref_mask selects no pixels")
    out = src.to_array()
    for c in range(src.channels):
        sv = src.data[c][sm]
        rv = ref.data[c][rm]
        order = np.argsort(sv, kind="stable")
        ranks = np.empty(sv.size, dtype=np.intp)
        ranks[order] = np.arange(sv.size)
        quantiles = (ranks + 1) / sv.size
        r_idx = _bin_index(rv, HIST_BINS)
        r_cdf = np.cumsum(np.bincount(r_idx, minlength=HIST_BINS)) / rv.size
        r_min = np.full(HIST_BINS, np.inf)
        np.minimum.at(r_min, r_idx, rv)
        # first reference bin whose cumulative mass reaches the quantile;
        # quantiles are positive and r_cdf ends at exactly 1.0, so this
        # always lands on a non-empty bin
        target_bin = np.searchsorted(r_cdf, quantiles, side="left")
        out[c][sm] = r_min[target_bin]
    return FeatureMap(out)


def makeup_loss(gen_s2r: FeatureMap, gen_r2s: FeatureMap, x_s: FeatureMap,
                x_r: FeatureMap, region_masks: Sequence[tuple]) -> float:
    """Sum over regions of the L2 norms between generated regions and
    their histogram-matched pseudo ground truths, in both directions.

    region_masks holds (source_mask, reference_mask) pairs. The L2 norm is
    the plain Euclidean norm over the region's pixels and channels (no
    mean reduction), so scaling residuals by t scales the loss by t.
    """
    if not region_masks:
        raise ValueError("at least one region mask pair is required")
    if gen_s2r.shape != x_s.shape or gen_r2s.shape != x_r.shape:
        raise ValueError("generated maps must match their source shapes")
    total = 0.0
    for ms, mr in region_masks:
        sm = _as_bool_mask(ms, (x_s.height, x_s.width), "source mask")
        rm = _as_bool_mask(mr, (x_r.height, x_r.width), "reference mask")
        hm_fwd = histogram_match(x_s, x_r, sm, rm)
        res_fwd = gen_s2r.data[:, sm] - hm_fwd.data[:, sm]
        hm_rev = histogram_match(x_r, x_s, rm, sm)
        res_rev = gen_r2s.data[:, rm] - hm_rev.data[:, rm]
        total += float(np.sqrt((res_fwd ** 2).sum()))
        total += float(np.sqrt((res_rev ** 2).sum()))
    return total


def cycle_l1(a: FeatureMap, b: FeatureMap) -> float:
    """Mean absolute difference (the L1 norm mean-reduced for scale
    stability across tensor sizes)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a.data - b.data).mean())


def perceptual_distance(feats_a: Sequence[FeatureMap], feats_b: Sequence[FeatureMap],
                        norm: str = "l2") -> float:
    """Distance between two feature lists, summed over layers.

    Per layer: "l2" gives sqrt(mean(diff^2)) and "l1" gives mean(|diff|);
    both are mean-reduced so layer sizes do not dominate. Feature
    extraction is the caller's business. Empty lists yield 0.
    """
    if norm not in ("l1", "l2"):
        raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")
    feats_a = list(feats_a)
    feats_b = list(feats_b)
    if len(feats_a) != len(feats_b):
        raise ValueError(f"layer counts differ: {len(feats_a)} vs {len(feats_b)}")
    total = 0.0
    for i, (fa, fb) in enumerate(zip(feats_a, feats_b)):
        if fa.shape != fb.shape:
            raise ValueError(f"layer {i} shape mismatch: {fa.shape} vs {fb.shape}")
        d = fa.data - fb.data
        if norm == "l2":
            total += float(np.sqrt((d ** 2).mean()))
        else:
            total += float(np.abs(d).mean())
    return total


def feature_matching(disc_feats_real: Sequence[Sequence[FeatureMap]],
                     disc_feats_fake: Sequence[Sequence[FeatureMap]]) -> float:
    """Discriminator feature matching: sum over discriminators and layers
    of the per-layer L1 norm scaled by 1/N_i (N_i = elements in layer i),
    i.e. the per-layer mean absolute difference."""
    real = [list(layers) for layers in disc_feats_real]
    fake = [list(layers) for layers in disc_feats_fake]
    if len(real) != len(fake):
        raise ValueError(f"discriminator counts differ: {len(real)} vs {len(fake)}")
    total = 0.0
    for k, (lr, lf) in enumerate(zip(real, fake)):
        if len(lr) != len(lf):
            raise ValueError(f"discriminator {k} layer counts differ")
        for i, (fr, ff) in enumerate(zip(lr, lf)):
            if fr.shape != ff.shape:
                raise ValueError(
                    f"discriminator {k} layer {i} shape mismatch: {fr.shape} vs {ff.shape}")
            total += float(np.abs(fr.data - ff.data).mean())
    return total


def hinge_adversarial(scores_real: FeatureMap, scores_fake: FeatureMap) -> tuple[float, float]:
    """Hinge GAN losses over raw discriminator scores.

    loss_d = mean(max(0, 1 - real)) + mean(max(0, 1 + fake));
    loss_g = -mean(fake).
    """
    loss_d = float(np.maximum(0.0, 1.0 - scores_real.data).mean()
                   + np.maximum(0.0, 1.0 + scores_fake.data).mean())
    loss_g = float(-scores_fake.data.mean())
    return loss_d, loss_g


def log_adversarial(d_real: FeatureMap, d_fake: FeatureMap) -> tuple[float, float]:
    """Log GAN losses for one domain discriminator, mean-reduced.

    Inputs are probabilities in [0, 1]; they are clamped into
    [1e-7, 1 - 1e-7] before the logs, so exact 0/1 stay finite. Values
    outside [0, 1] are rejected.

    loss_d = -mean(log real) - mean(log(1 - fake)); loss_g = -mean(log fake).
    """
    for name, m in (("d_real", d_real), ("d_fake", d_fake)):
        if m.data.min() < 0.0 or m.data.max() > 1.0:
            raise ValueError(f"{name} must hold probabilities in [0, 1]")
    lo, hi = 1e-7, 1.0 - 1e-7
    real = np.clip(d_real.data, lo, hi)
    fake = np.clip(d_fake.data, lo, hi)
    loss_d = float(-np.log(real).mean() - np.log(1.0 - fake).mean())
    loss_g = float(-np.log(fake).mean())
    return loss_d, loss_g


def _region_pixels(img: FeatureMap, mask: SegMask, rid: int) -> np.ndarray:
    hit = mask.labels == rid
    return img.data[:, hit]


def pfdm(img_a: FeatureMap, img_b: FeatureMap, mask_a: SegMask, mask_b: SegMask,
         regions: Sequence[int] | None = None, bins: int = PFDM_BINS) -> float:
    """Area-weighted L1 distance between per-region color histograms.

    Per region and channel: normalized histograms (``bins`` bins over
    [0, 1]) of the masked pixels of both images, L1 distance between them,
    averaged over channels. Regions are combined by a weighted average
    using the mean of each region's pixel-count fraction in the two masks
    (fractions are taken over the listed regions, so weights sum to 1).
    Result lies in [0, 2]; disjoint color distributions score 2.

    regions defaults to the ids present in both masks. A listed region
    missing from either mask raises RegionNotFoundError.
    """
    if img_a.channels != img_b.channels:
        raise ValueError(f"channel mismatch: {img_a.channels} vs {img_b.channels}")
    if (img_a.height, img_a.width) != mask_a.shape:
        raise ValueError("mask_a does not match img_a")
    if (img_b.height, img_b.width) != mask_b.shape:
        raise ValueError("mask_b does not match img_b")
    if regions is None:
        regions = sorted(set(region_set(mask_a)) & set(region_set(mask_b)))
        if not regions:
            raise ValueError("the masks share no regions")
    regions = [int(r) for r in regions]
    counts_a, counts_b = [], []
    for rid in regions:
        na = int((mask_a.labels == rid).sum())
        nb = int((mask_b.labels == rid).sum())
        if na == 0:
            raise RegionNotFoundError(f"region {rid} not present in mask_a")
        if nb == 0:
            raise RegionNotFoundError(f"region {rid} not present in mask_b")
        counts_a.append(na)
        counts_b.append(nb)
    tot_a = float(sum(counts_a))
    tot_b = float(sum(counts_b))
    value = 0.0
    for rid, na, nb in zip(regions, counts_a, counts_b):
        pa = _region_pixels(img_a, mask_a, rid)
        pb = _region_pixels(img_b, mask_b, rid)
        dist = 0.0
        for c in range(img_a.channels):
            ha = np.bincount(_bin_index(pa[c], bins), minlength=bins) / na
            hb = np.bincount(_bin_index(pb[c], bins), minlength=bins) / nb
            dist += float(np.abs(ha - hb).sum())
        dist /= img_a.channels
        weight = 0.5 * (na / tot_a + nb / tot_b)
        value += weight * dist
    return value
