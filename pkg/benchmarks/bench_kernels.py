#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the three hot kernels on representative shapes plus a whole-image
transfer, and verifies the two backends agree. Run after building the
extension:

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from regionstyle._kernels import _fallback

try:
    from regionstyle._kernels import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(name, make_args, runners, repeat):
    args = make_args()
    rows = []
    base = None
    for label, impl in runners:
        if impl is None:
            rows.append((label, None, None))
            continue
        out = impl(*args)
        t = best_of(lambda: impl(*args), repeat)
        if base is None:
            base, base_out = t, out
        else:
            err = float(np.max(np.abs(np.asarray(out) - np.asarray(base_out))))
            assert err < 1e-9, f"{name}: backends disagree by {err}"
        rows.append((label, t, base / t))
    print(f"{name}")
    for label, t, speedup in rows:
        if t is None:
            print(f"  {label:<10} (not built)")
        else:
            print(f"  {label:<10} {t * 1e3:9.3f} ms   x{speedup:.1f}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    x = rng.normal(size=(8, 128, 128))
    w = rng.normal(size=(3, 8, 3, 3))
    b = rng.normal(size=3)
    runners = [("numpy", _fallback.conv3x3),
               ("compiled", _ext.conv3x3 if _ext else None)]
    bench_kernel("conv3x3 (8ch, 128x128 -> 3ch)",
                 lambda: (x, w, b), runners, args.repeat)

    small = rng.normal(size=(8, 17, 23))
    runners = [("numpy", _fallback.bilinear_resize),
               ("compiled", _ext.bilinear_resize if _ext else None)]
    bench_kernel("bilinear_resize (8ch, 17x23 -> 128x128)",
                 lambda: (small, 128, 128), runners, args.repeat)

    runners = [("numpy", _fallback.block_sum),
               ("compiled", _ext.block_sum if _ext else None)]
    bench_kernel("block_sum (8ch, 128x128 -> 7x7)",
                 lambda: (x, 7, 7), runners, args.repeat)

    runners = [("numpy", _fallback.block_expand),
               ("compiled", _ext.block_expand if _ext else None)]
    m = rng.normal(size=(8, 7, 7))
    bench_kernel("block_expand (8ch, 7x7 -> 128x128)",
                 lambda: (m, 128, 128), runners, args.repeat)

    _bench_transfer(args.repeat)


def _bench_transfer(repeat):
    """Whole-pipeline timing under each backend (subprocess so the import-
    time backend selection can differ)."""
    import os
    import subprocess
    import sys

    code = (
        "import numpy as np, time\n"
        "from regionstyle import kernel_backend, transfer_features\n"
        "from regionstyle.testing import make_transfer_instance\n"
        "rng = np.random.default_rng(0)\n"
        "inst = make_transfer_instance(rng, channels=8, h=192, w=192,"
        " n_regions=3, branch_counts=[3, 2, 2], gate_scale=0.1)\n"
        "best = float('inf')\n"
        f"for _ in range({repeat}):\n"
        "    t0 = time.perf_counter()\n"
        "    transfer_features(inst['f'], inst['v'], inst['mask_f'],"
        " inst['mask_v'], inst['config'], inst['gates'])\n"
        "    best = min(best, time.perf_counter() - t0)\n"
        "print(f'{kernel_backend()}: {best * 1e3:.1f} ms')\n"
    )
    print("transfer_features (8ch, 192x192, 3 regions)")
    for env_val in ("1", "0"):
        env = dict(os.environ, REGIONSTYLE_PURE=env_val)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        print("  " + (out.stdout.strip() or out.stderr.strip()))


if __name__ == "__main__":
    main()
