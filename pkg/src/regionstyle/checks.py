"""Cross-module invariant suite on seeded random instances.

Each check exercises one contract of the pipeline; the CLI `check`
command runs all of them and reports per-property maximum errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._ops import block_counts
from .gates import GateWeights, fuse_params, gate_forward, random_gates
from .masks import merge_region, region_bbox_crop, region_set
from .testing import (make_config, make_transfer_instance, random_map,
                      random_mask_pair)
from .transfer import moment_transfer, transfer_features


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    detail: str


def _check_degeneration(rng, instances):
    worst = 0.0
    for _ in range(instances):
        inst = make_transfer_instance(rng, channels=int(rng.integers(1, 4)),
                                      h=int(rng.integers(6, 14)),
                                      w=int(rng.integers(6, 14)),
                                      n_regions=int(rng.integers(1, 3)),
                                      branch_counts=None, gate_scale=0.0)
        cfg = inst["config"]
        k1 = make_config(sorted(cfg.regions), [1] * len(cfg.regions))
        got = transfer_features(inst["f"], inst["v"], inst["mask_f"],
                                inst["mask_v"], k1)
        want = moment_transfer(inst["f"], inst["v"], inst["mask_f"],
                               inst["mask_v"], epsilon=k1.epsilon)
        worst = max(worst, float(np.abs(got.data - want.data).max()))
    return CheckResult("degeneration-equivalence", worst <= 1e-8, worst,
                       "single-branch single-block transfer vs direct moment matching")


def _check_simplex(rng, instances):
    worst = 0.0
    for i in range(instances):
        c = int(rng.integers(1, 4))
        k = int(rng.integers(1, 5))
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        mode = "scalar" if i % 2 == 0 else "spatial"
        theta = random_gates({1: k}, c, mode, rng, scale=0.5)[1].source
        f = random_map(rng, c, h, w)
        v = random_map(rng, c, h, w)
        for order in ("fv", "vf"):
            gw = gate_forward(f, v, theta, order)
            sums = gw.values.sum() if mode == "scalar" else gw.values.sum(axis=0)
            worst = max(worst, float(np.max(np.abs(sums - 1.0))))
            if gw.values.min() < 0:
                worst = max(worst, float(-gw.values.min()))
    return CheckResult("gate-simplex", worst <= 1e-12, worst,
                       "softmax weights nonnegative and summing to 1")


def _check_partition(rng, instances):
    bad = 0
    for _ in range(instances):
        h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        gh = int(rng.integers(1, h + 1))
        gw = int(rng.integers(1, w + 1))
        counts = block_counts(h, w, gh, gw)
        if counts.sum() != h * w or counts.min() < 1:
            bad += 1
    return CheckResult("block-partition", bad == 0, float(bad),
                       "block tilings cover every pixel exactly once")


def _check_region_partition(rng, instances):
    bad = 0
    for _ in range(instances):
        h, w = int(rng.integers(6, 16)), int(rng.integers(6, 16))
        n = int(rng.integers(1, 4))
        mask, _ = random_mask_pair(rng, h, w, range(1, n + 1))
        f = random_map(rng, 2, h, w)
        total = 0
        for rid in region_set(mask):
            crop = region_bbox_crop(f, mask, rid)
            total += int(crop.binary_mask.sum())
        if total != int((mask.labels != 0).sum()):
            bad += 1
    return CheckResult("region-partition", bad == 0, float(bad),
                       "region masks partition the labeled pixels")


def _check_passthrough(rng, instances):
    bad = 0
    for _ in range(instances):
        inst = make_transfer_instance(rng, channels=2,
                                      h=int(rng.integers(6, 14)),
                                      w=int(rng.integers(6, 14)),
                                      n_regions=int(rng.integers(1, 3)),
                                      gate_scale=0.2)
        out = transfer_features(inst["f"], inst["v"], inst["mask_f"],
                                inst["mask_v"], inst["config"], inst["gates"])
        untouched = np.ones(inst["mask_f"].shape, dtype=bool)
        common = set(region_set(inst["mask_f"])) & set(region_set(inst["mask_v"]))
        for rid in common:
            untouched &= inst["mask_f"].labels != rid
        if not (out.data[:, untouched] == inst["f"].data[:, untouched]).all():
            bad += 1
    return CheckResult("passthrough", bad == 0, float(bad),
                       "pixels outside processed regions pass through bitwise")


def _check_self_transfer(rng, instances):
    worst = 0.0
    for _ in range(instances):
        inst = make_transfer_instance(rng, channels=int(rng.integers(1, 4)),
                                      h=int(rng.integers(6, 14)),
                                      w=int(rng.integers(6, 14)),
                                      n_regions=int(rng.integers(1, 3)),
                                      gate_scale=0.0)
        out = transfer_features(inst["f"], inst["f"], inst["mask_f"],
                                inst["mask_f"], inst["config"])
        worst = max(worst, float(np.abs(out.data - inst["f"].data).max()))
    return CheckResult("self-transfer", worst <= 1e-8, worst,
                       "zero gates reproduce the input on self-transfer")


def _check_crop_merge(rng, instances):
    bad = 0
    for _ in range(instances):
        h, w = int(rng.integers(6, 16)), int(rng.integers(6, 16))
        n = int(rng.integers(1, 4))
        mask, _ = random_mask_pair(rng, h, w, range(1, n + 1))
        f = random_map(rng, int(rng.integers(1, 4)), h, w)
        out = f
        for rid in region_set(mask):
            crop = region_bbox_crop(f, mask, rid)
            out = merge_region(out, crop.feature, crop)
        if not (out.data == f.data).all():
            bad += 1
    return CheckResult("crop-merge-identity", bad == 0, float(bad),
                       "merging an unmodified crop is the identity")


def _check_fusion_bounds(rng, instances):
    worst = 0.0
    for i in range(instances):
        c = int(rng.integers(1, 4))
        k = int(rng.integers(1, 5))
        h, w = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        maps = [random_map(rng, c, h, w) for _ in range(k)]
        if i % 2 == 0:
            raw = rng.random(k) + 1e-3
            weights = GateWeights("scalar", raw / raw.sum())
        else:
            raw = rng.random((k, h, w)) + 1e-3
            weights = GateWeights("spatial", raw / raw.sum(axis=0))
        fused = fuse_params(weights, maps)
        stack = np.stack([m.data for m in maps])
        over = float(np.max(fused.data - stack.max(axis=0)))
        under = float(np.max(stack.min(axis=0) - fused.data))
        worst = max(worst, over, under)
    return CheckResult("fusion-bounds", worst <= 1e-12, worst,
                       "fused maps stay within per-point branch min/max")


def run_checks(seed: int = 0, instances: int = 50) -> list[CheckResult]:
    """Run the whole invariant suite; deterministic for a given seed."""
    checks = (
        _check_degeneration,
        _check_simplex,
        _check_partition,
        _check_region_partition,
        _check_passthrough,
        _check_self_transfer,
        _check_crop_merge,
        _check_fusion_bounds,
    )
    results = []
    root = np.random.SeedSequence(seed)
    for fn, child in zip(checks, root.spawn(len(checks))):
        results.append(fn(np.random.default_rng(child), instances))
    return results
