#!/usr/bin/env python3
"""Generate the bundled 64x64 two-region demo pair under demo/.

Deterministic: a textured "patch" region and a smooth "stripe" region,
placed differently in the source and reference so the size/position
misalignment handling is visible. Also writes the two pipeline configs
used in the README and the end-to-end tests.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from regionstyle import RegionSpec, TransferConfig, save_config
from regionstyle.images import save_mask, save_rgb
from regionstyle.masks import SegMask
from regionstyle.tensor import FeatureMap

SIZE = 64
OUT = os.path.join(os.path.dirname(__file__), "..", "demo")


def gradient_image(rng, base, tilt, noise):
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] / (SIZE - 1)
    img = np.empty((3, SIZE, SIZE))
    for c in range(3):
        img[c] = base[c] + tilt[c][0] * yy + tilt[c][1] * xx
    img += rng.normal(0.0, noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def paint(img, box, base, tilt, texture, rng):
    r0, c0, h, w = box
    yy, xx = np.mgrid[0:h, 0:w] / max(h - 1, 1)
    for c in range(3):
        patch = base[c] + tilt[c][0] * yy + tilt[c][1] * xx
        if texture > 0:
            patch += texture * np.sin(2 * np.pi * (yy * 3 + xx * 5))
            patch += rng.normal(0.0, texture / 2, patch.shape)
        img[c, r0:r0 + h, c0:c0 + w] = np.clip(patch, 0.0, 1.0)


def label(mask, box, rid):
    r0, c0, h, w = box
    mask[r0:r0 + h, c0:c0 + w] = rid


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(20240817)

    src = gradient_image(rng, (0.55, 0.5, 0.45), ((0.1, 0.0), (0.0, 0.1), (0.05, 0.05)), 0.01)
    src_mask = np.zeros((SIZE, SIZE), dtype=np.uint8)
    src_box1 = (8, 6, 22, 24)    # region 1: large, upper left
    src_box2 = (38, 34, 18, 24)  # region 2: lower right
    paint(src, src_box1, (0.75, 0.25, 0.2), ((0.1, 0.0), (0.0, 0.05), (0.0, 0.0)), 0.0, rng)
    paint(src, src_box2, (0.2, 0.6, 0.25), ((0.0, 0.08), (0.05, 0.0), (0.0, 0.0)), 0.0, rng)
    label(src_mask, src_box1, 1)
    label(src_mask, src_box2, 2)

    ref = gradient_image(rng, (0.4, 0.45, 0.55), ((0.0, 0.1), (0.08, 0.0), (0.02, 0.02)), 0.01)
    ref_mask = np.zeros((SIZE, SIZE), dtype=np.uint8)
    ref_box1 = (30, 36, 28, 22)  # region 1: different place and size
    ref_box2 = (6, 8, 14, 16)
    paint(ref, ref_box1, (0.2, 0.3, 0.75), ((0.15, 0.1), (0.0, 0.1), (0.0, 0.0)), 0.12, rng)
    paint(ref, ref_box2, (0.85, 0.75, 0.2), ((0.0, 0.05), (0.0, 0.05), (0.0, 0.0)), 0.04, rng)
    label(ref_mask, ref_box1, 1)
    label(ref_mask, ref_box2, 2)

    save_rgb(FeatureMap(src), os.path.join(OUT, "source.png"))
    save_rgb(FeatureMap(ref), os.path.join(OUT, "reference.png"))
    save_mask(SegMask(src_mask), os.path.join(OUT, "source_mask.png"))
    save_mask(SegMask(ref_mask), os.path.join(OUT, "reference_mask.png"))

    config = TransferConfig(regions={
        1: RegionSpec(name="patch", levels=(1, 6, "half")),
        2: RegionSpec(name="stripe", levels=(1, "half")),
    })
    save_config(config, os.path.join(OUT, "config.json"))

    config_k1 = TransferConfig(regions={
        1: RegionSpec(name="patch", levels=(1,)),
        2: RegionSpec(name="stripe", levels=(1,)),
    })
    save_config(config_k1, os.path.join(OUT, "config_k1.json"))
    print(f"wrote demo assets to {os.path.abspath(OUT)}")


if __name__ == "__main__":
    main()
