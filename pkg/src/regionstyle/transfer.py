"""The full region-adaptive transfer pipeline.

Per region: crop both maps to the region's tight bounding box, compute
pyramid block statistics of each crop (source side supplies the whitening
mean/std, reference side the new shift/scale), resize everything to the
source crop's size, fuse the branches with gate weights, normalize, and
merge the result back under the region mask. Pixels in no processed
region pass through bitwise.

With one branch of one block per region and zero gate weights this
reduces to plain per-region moment transfer; ``moment_transfer`` computes
that directly and independently, as an oracle.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._ops import PLAIN
from .errors import ConfigError
from .gates import GATE_MODES, SCALAR, RegionGates, uniform_gates
from .masks import RegionCrop, SegMask, region_set
from .pyramid import _moments, effective_mask, resolve_level, validate_level
from .tensor import FeatureMap

log = logging.getLogger(__name__)

RESIZE_MODES = ("bilinear", "nearest")


@dataclass(frozen=True)
class RegionSpec:
    """Pyramid recipe of one region: display name plus its level list."""

    name: str
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ConfigError(f"region {self.name!r} needs at least one level")
        for lv in levels:
            try:
                validate_level(lv)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        object.__setattr__(self, "levels", levels)

    @property
    def branches(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class TransferConfig:
    """Pipeline configuration.

    regions maps region id -> RegionSpec. epsilon is the variance floor,
    resize_mode aligns statistic grids (and the gate input), gate_mode
    selects scalar or spatial branch weights, masked_stats restricts block
    statistics to region pixels.
    """

    regions: Mapping[int, RegionSpec]
    epsilon: float = 1e-5
    resize_mode: str = "bilinear"
    gate_mode: str = SCALAR
    masked_stats: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.resize_mode not in RESIZE_MODES:
            raise ConfigError(f"resize mode must be one of {RESIZE_MODES}")
        if self.gate_mode not in GATE_MODES:
            raise ConfigError(f"gate mode must be one of {GATE_MODES}")
        regions = {}
        for rid, spec in self.regions.items():
            rid = int(rid)
            if not 1 <= rid <= 255:
                raise ConfigError(f"region id {rid} outside 1..255")
            regions[rid] = spec
        object.__setattr__(self, "regions", regions)

    def branch_counts(self) -> dict[int, int]:
        return {rid: spec.branches for rid, spec in self.regions.items()}

    def to_json(self) -> str:
        doc = {
            "epsilon": self.epsilon,
            "resize": self.resize_mode,
            "gate": self.gate_mode,
            "masked_stats": self.masked_stats,
            "regions": {str(rid): {"name": spec.name, "levels": list(spec.levels)}
                        for rid, spec in sorted(self.regions.items())},
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TransferConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or "regions" not in doc:
            raise ConfigError("config must be a JSON object with a 'regions' entry")
        regions = {}
        for key, entry in doc["regions"].items():
            try:
                rid = int(key)
            except ValueError:
                raise ConfigError(f"region key {key!r} is not an integer") from None
            if not isinstance(entry, dict) or "levels" not in entry:
                raise ConfigError(f"region {rid} needs a 'levels' list")
            regions[rid] = RegionSpec(name=str(entry.get("name", f"region-{rid}")),
                                      levels=tuple(entry["levels"]))
        return cls(regions=regions,
                   epsilon=float(doc.get("epsilon", 1e-5)),
                   resize_mode=str(doc.get("resize", "bilinear")),
                   gate_mode=str(doc.get("gate", SCALAR)),
                   masked_stats=bool(doc.get("masked_stats", False)))


def load_config(path) -> TransferConfig:
    with open(path, encoding="utf-8") as fh:
        return TransferConfig.from_json(fh.read())


def save_config(config: TransferConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config.to_json() + "\n")


@dataclass(frozen=True)
class RegionPlan:
    """Which regions a transfer will touch, and why the rest are skipped."""

    processed: tuple[int, ...]
    missing_in_source: tuple[int, ...] = ()
    missing_in_reference: tuple[int, ...] = ()
    unconfigured: tuple[int, ...] = ()


def plan_regions(mask_f: SegMask, mask_v: SegMask, config: TransferConfig) -> RegionPlan:
    """Partition the region ids of a mask pair by how the pipeline treats them."""
    in_f = set(region_set(mask_f))
    in_v = set(region_set(mask_v))
    configured = set(config.regions)
    processed = sorted(in_f & in_v & configured)
    return RegionPlan(
        processed=tuple(processed),
        missing_in_source=tuple(sorted((in_v - in_f) & configured)),
        missing_in_reference=tuple(sorted((in_f - in_v) & configured)),
        unconfigured=tuple(sorted((in_f & in_v) - configured)),
    )


def _gate_weights(ops, a, b, kern, bias, mode):
    z = ops.conv3x3(ops.concat(a, b), kern, bias)
    if mode == SCALAR:
        return ops.softmax_vec(ops.global_mean(z))
    return ops.softmax_map(z)


def _branch_stats(ops, x, levels, epsilon, h_t, w_t, resize_mode, weights):
    means, stds = [], []
    _, h, w = ops.value(x).shape
    for level in levels:
        grid = resolve_level(level, h, w)
        wts = None if weights is None else effective_mask(weights, grid)
        mean, std = _moments(ops, x, grid, epsilon, wts)
        means.append(ops.resize(mean, h_t, w_t, resize_mode))
        stds.append(ops.resize(std, h_t, w_t, resize_mode))
    return means, stds


def _region_transfer(ops, f_sub, v_sub, spec, epsilon, resize_mode, gate_mode,
                     src_kern, src_bias, ref_kern, ref_bias,
                     f_weights=None, v_weights=None):
    """Normalized activation for one region; f_sub/v_sub are the crops."""
    _, h_f, w_f = ops.value(f_sub).shape
    src_means, src_stds = _branch_stats(ops, f_sub, spec.levels, epsilon,
                                        h_f, w_f, resize_mode, f_weights)
    ref_means, ref_stds = _branch_stats(ops, v_sub, spec.levels, epsilon,
                                        h_f, w_f, resize_mode, v_weights)
    v_res = ops.resize(v_sub, h_f, w_f, resize_mode)

    fuse = ops.wsum_scalar if gate_mode == SCALAR else ops.wsum_spatial
    # source-first concat feeds the mean/shift weights, reference-first the
    # std/scale weights; the source and reference fusions use their own gates
    w_mean = _gate_weights(ops, f_sub, v_res, src_kern, src_bias, gate_mode)
    w_std = _gate_weights(ops, v_res, f_sub, src_kern, src_bias, gate_mode)
    w_shift = _gate_weights(ops, f_sub, v_res, ref_kern, ref_bias, gate_mode)
    w_scale = _gate_weights(ops, v_res, f_sub, ref_kern, ref_bias, gate_mode)

    mean = fuse(w_mean, src_means)
    std = fuse(w_std, src_stds)
    shift = fuse(w_shift, ref_means)
    scale = fuse(w_scale, ref_stds)
    return ops.add(ops.mul(scale, ops.div(ops.sub(f_sub, mean), std)), shift)


def _pipeline(ops, f, v, mf_labels, mv_labels, config, gate_arrays):
    """Whole-image transfer over the ops protocol.

    f and v are (C, H, W) arrays or tape variables; masks are constant
    label arrays. gate_arrays maps region id to (src_kern, src_bias,
    ref_kern, ref_bias), each an array or tape variable. Crops always read
    the original f; merges write disjoint pixel sets, so ascending-id
    order is just a determinism convention.
    """
    ids = sorted(set(np.unique(mf_labels)) & set(np.unique(mv_labels))
                 & set(config.regions))
    ids = [int(r) for r in ids if r != 0]
    out = f
    for rid in ids:
        bbox_f, bm_f = _bbox_of(mf_labels, rid)
        bbox_v, bm_v = _bbox_of(mv_labels, rid)
        f_sub = ops.crop(f, bbox_f)
        v_sub = ops.crop(v, bbox_v)
        fw = vw = None
        if config.masked_stats:
            fw = bm_f.astype(np.float64)
            vw = bm_v.astype(np.float64)
        sk, sb, rk, rb = gate_arrays[rid]
        patch = _region_transfer(ops, f_sub, v_sub, config.regions[rid],
                                 config.epsilon, config.resize_mode,
                                 config.gate_mode, sk, sb, rk, rb,
                                 f_weights=fw, v_weights=vw)
        out = ops.merge(out, patch, bbox_f, bm_f.astype(bool))
    return out


def _bbox_of(labels, rid):
    hit = labels == rid
    rows = np.flatnonzero(hit.any(axis=1))
    cols = np.flatnonzero(hit.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    bbox = (r0, c0, r1 - r0 + 1, c1 - c0 + 1)
    return bbox, hit[r0:r1 + 1, c0:c1 + 1]


def _check_gate_pair(rid, spec, rg, channels, gate_mode):
    if rg.source.branches != spec.branches:
        raise ConfigError(
            f"region {rid}: gate has {rg.source.branches} branches, "
            f"config expects {spec.branches}")
    if rg.source.in_channels != 2 * channels:
        raise ConfigError(
            f"region {rid}: gate expects {rg.source.in_channels} input "
            f"channels, maps give {2 * channels}")
    if rg.source.mode != gate_mode:
        raise ConfigError(
            f"region {rid}: gate mode {rg.source.mode!r} does not match "
            f"config gate mode {gate_mode!r}")


def _check_gates(config, gates, channels):
    for rid, spec in config.regions.items():
        if rid not in gates:
            raise ConfigError(f"no gate parameters for region {rid}")
        _check_gate_pair(rid, spec, gates[rid], channels, config.gate_mode)


def _gate_array_table(config, gates):
    return {rid: (rg.source.kernel, rg.source.bias,
                  rg.reference.kernel, rg.reference.bias)
            for rid, rg in gates.items() if rid in config.regions}


def normalize_region(f_crop: RegionCrop, v_crop: RegionCrop,
                     config: TransferConfig, gates: RegionGates) -> FeatureMap:
    """Run the per-region math on a prepared crop pair.

    Returns the renormalized source crop (shape of f_crop.feature); the
    caller merges it. Statistics cover every bbox pixel unless
    config.masked_stats is set.
    """
    if f_crop.feature.channels != v_crop.feature.channels:
        raise ValueError(
            f"crops disagree on channels: {f_crop.feature.channels} vs "
            f"{v_crop.feature.channels}")
    rid = f_crop.region_id
    if rid not in config.regions:
        raise ConfigError(f"no config entry for region {rid}")
    _check_gate_pair(rid, config.regions[rid], gates, f_crop.feature.channels,
                     config.gate_mode)
    fw = vw = None
    if config.masked_stats:
        fw = f_crop.binary_mask.astype(np.float64)
        vw = v_crop.binary_mask.astype(np.float64)
    out = _region_transfer(PLAIN, f_crop.feature.data, v_crop.feature.data,
                           config.regions[rid], config.epsilon,
                           config.resize_mode, config.gate_mode,
                           gates.source.kernel, gates.source.bias,
                           gates.reference.kernel, gates.reference.bias,
                           f_weights=fw, v_weights=vw)
    return FeatureMap(out)


def transfer_features(f: FeatureMap, v: FeatureMap, mask_f: SegMask,
                      mask_v: SegMask, config: TransferConfig,
                      gates: Mapping[int, RegionGates] | None = None) -> FeatureMap:
    """Region-wise style statistic transfer from v onto f.

    Every region id present in both masks and configured is processed in
    ascending order; all other pixels pass through bitwise. gates=None
    uses zero gates (uniform branch weights).
    """
    if f.channels != v.channels:
        raise ValueError(f"maps disagree on channels: {f.channels} vs {v.channels}")
    if (f.height, f.width) != mask_f.shape:
        raise ValueError("source mask does not match the source map")
    if (v.height, v.width) != mask_v.shape:
        raise ValueError("reference mask does not match the reference map")
    if gates is None:
        gates = uniform_gates(config.branch_counts(), f.channels, config.gate_mode)
    _check_gates(config, gates, f.channels)
    plan = plan_regions(mask_f, mask_v, config)
    for rid in plan.missing_in_source:
        log.warning("region %d configured but absent from the source mask; skipped", rid)
    for rid in plan.missing_in_reference:
        log.warning("region %d configured but absent from the reference mask; skipped", rid)
    out = _pipeline(PLAIN, f.data, v.data, mask_f.labels, mask_v.labels,
                    config, _gate_array_table(config, gates))
    return FeatureMap(out)


def moment_transfer(f: FeatureMap, v: FeatureMap, mask_f: SegMask,
                    mask_v: SegMask, epsilon: float = 1e-5) -> FeatureMap:
    """Direct per-region moment matching, no pyramids or gates.

    For every region id present in both masks: take the per-channel mean
    and std = sqrt(var + epsilon) over each side's bounding-box crop, then
    rewrite the region pixels as ref_std * (x - src_mean) / src_std +
    ref_mean. Serves as the independent oracle for the single-branch,
    single-block configuration of transfer_features.
    """
    if f.channels != v.channels:
        raise ValueError(f"maps disagree on channels: {f.channels} vs {v.channels}")
    if (f.height, f.width) != mask_f.shape:
        raise ValueError("source mask does not match the source map")
    if (v.height, v.width) != mask_v.shape:
        raise ValueError("reference mask does not match the reference map")
    ids = sorted(set(region_set(mask_f)) & set(region_set(mask_v)))
    out = f.to_array()
    for rid in ids:
        f_hit = mask_f.labels == rid
        v_hit = mask_v.labels == rid
        fr = np.flatnonzero(f_hit.any(axis=1))
        fc = np.flatnonzero(f_hit.any(axis=0))
        vr = np.flatnonzero(v_hit.any(axis=1))
        vc = np.flatnonzero(v_hit.any(axis=0))
        f_sub = f.data[:, fr[0]:fr[-1] + 1, fc[0]:fc[-1] + 1]
        v_sub = v.data[:, vr[0]:vr[-1] + 1, vc[0]:vc[-1] + 1]
        m_src = f_sub.mean(axis=(1, 2))
        s_src = np.sqrt(f_sub.var(axis=(1, 2)) + epsilon)
        m_ref = v_sub.mean(axis=(1, 2))
        s_ref = np.sqrt(v_sub.var(axis=(1, 2)) + epsilon)
        vals = f.data[:, f_hit]
        out[:, f_hit] = (s_ref[:, None] * (vals - m_src[:, None]) / s_src[:, None]
                         + m_ref[:, None])
    return FeatureMap(out)
