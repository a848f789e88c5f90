"""Command-line surface.

Subcommands:
  transfer   region-wise style statistic transfer between masked PNGs
  stats      dump per-region pyramid block statistics as JSON
  check      run the cross-module invariant suite
  gradcheck  analytic-vs-numeric gradient report as JSON
  pfdm       histogram distance between two masked images

Exit codes: 0 success, 1 check/gradcheck failure, 2 usage or input error.
Diagnostics go to stderr; machine-readable output goes to stdout or the
requested file.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .autodiff import gradcheck_report
from .checks import run_checks
from .errors import ConfigError, RegionNotFoundError
from .gates import load_gates, uniform_gates
from .images import load_mask, load_rgb, save_rgb
from .losses import pfdm
from .masks import region_bbox_crop, region_set
from .pyramid import level_stats, resolve_level
from .transfer import load_config, plan_regions, transfer_features


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="regionstyle",
        description="Region-wise style statistic transfer between masked images.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", help="transfer region statistics onto an image")
    p.add_argument("--source", required=True, help="source RGB PNG")
    p.add_argument("--reference", required=True, help="reference RGB PNG")
    p.add_argument("--source-mask", required=True, help="source label-map PNG")
    p.add_argument("--reference-mask", required=True, help="reference label-map PNG")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="output PNG path")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--theta", help="gate parameter JSON")
    group.add_argument("--uniform-gate", action="store_true",
                       help="zero gates (uniform branch weights); the default")
    p.add_argument("--gate-mode", choices=("scalar", "spatial"),
                   help="override the config's gate mode")
    p.add_argument("--resize", choices=("bilinear", "nearest"),
                   help="override the config's resize mode")

    p = sub.add_parser("stats", help="dump per-region block statistics")
    p.add_argument("--image", required=True, help="RGB PNG")
    p.add_argument("--mask", required=True, help="label-map PNG")
    p.add_argument("--config", required=True, help="pipeline config JSON")

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true",
                   help="list each property with its max observed error")

    p = sub.add_parser("gradcheck", help="finite-difference gradient report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--report", help="also write the JSON report to this path")

    p = sub.add_parser("pfdm", help="histogram distance between masked images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--mask-a", required=True)
    p.add_argument("--mask-b", required=True)
    p.add_argument("--regions", help="comma-separated region ids (default: common)")
    return parser


def _override_config(cfg, args):
    changes = {}
    if args.gate_mode and args.gate_mode != cfg.gate_mode:
        changes["gate_mode"] = args.gate_mode
    if args.resize and args.resize != cfg.resize_mode:
        changes["resize_mode"] = args.resize
    if not changes:
        return cfg
    from dataclasses import replace
    return replace(cfg, **changes)


def _cmd_transfer(args) -> int:
    f = load_rgb(args.source)
    v = load_rgb(args.reference)
    mask_f = load_mask(args.source_mask)
    mask_v = load_mask(args.reference_mask)
    if (f.height, f.width) != mask_f.shape:
        raise ValueError("source mask dimensions do not match the source image")
    if (v.height, v.width) != mask_v.shape:
        raise ValueError("reference mask dimensions do not match the reference image")
    cfg = _override_config(load_config(args.config), args)
    if args.theta:
        gates = load_gates(args.theta)
    else:
        gates = uniform_gates(cfg.branch_counts(), f.channels, cfg.gate_mode)
    plan = plan_regions(mask_f, mask_v, cfg)
    for rid in plan.missing_in_source:
        print(f"warning: region {rid} absent from the source mask; skipped",
              file=sys.stderr)
    for rid in plan.missing_in_reference:
        print(f"warning: region {rid} absent from the reference mask; skipped",
              file=sys.stderr)
    out = transfer_features(f, v, mask_f, mask_v, cfg, gates)
    save_rgb(out, args.out)
    return 0


def _cmd_stats(args) -> int:
    img = load_rgb(args.image)
    mask = load_mask(args.mask)
    if (img.height, img.width) != mask.shape:
        raise ValueError("mask dimensions do not match the image")
    cfg = load_config(args.config)
    present = region_set(mask)
    doc = {"epsilon": cfg.epsilon, "regions": {}}
    for rid in sorted(cfg.regions):
        if rid not in present:
            continue
        spec = cfg.regions[rid]
        crop = region_bbox_crop(img, mask, rid)
        branches = []
        for level in spec.levels:
            grid = resolve_level(level, crop.feature.height, crop.feature.width)
            region_mask = crop.binary_mask if cfg.masked_stats else None
            mean, std = level_stats(crop.feature, grid, cfg.epsilon,
                                    region_mask=region_mask)
            branches.append({
                "level": level,
                "grid": list(grid),
                "block_mean": mean.data.tolist(),
                "block_std": std.data.tolist(),
            })
        doc["regions"][str(rid)] = {
            "name": spec.name,
            "bbox": list(crop.bbox),
            "branches": branches,
        }
    print(json.dumps(doc, indent=2))
    return 0


def _cmd_check(args) -> int:
    results = run_checks(seed=args.seed)
    failed = [r for r in results if not r.passed]
    if args.verbose:
        for r in results:
            status = "pass" if r.passed else "FAIL"
            print(f"{status}  {r.name:<24} max_error={r.max_error:.3e}  ({r.detail})")
    else:
        for r in results:
            print(f"{'pass' if r.passed else 'FAIL'}  {r.name}")
    print(f"{len(results) - len(failed)}/{len(results)} properties hold")
    return 0 if not failed else 1


def _cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise ValueError("--trials must be at least 1")
    report = gradcheck_report(seed=args.seed, trials=args.trials)
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if report["pass"] else 1


def _cmd_pfdm(args) -> int:
    img_a = load_rgb(args.image_a)
    img_b = load_rgb(args.image_b)
    mask_a = load_mask(args.mask_a)
    mask_b = load_mask(args.mask_b)
    regions = None
    if args.regions:
        try:
            regions = [int(part) for part in args.regions.split(",") if part]
        except ValueError:
            raise ValueError(f"--regions must be comma-separated ints, got {args.regions!r}")
    value = pfdm(img_a, img_b, mask_a, mask_b, regions=regions)
    print(f"{value:.6f}")
    return 0


_COMMANDS = {
    "transfer": _cmd_transfer,
    "stats": _cmd_stats,
    "check": _cmd_check,
    "gradcheck": _cmd_gradcheck,
    "pfdm": _cmd_pfdm,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, ConfigError, RegionNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
