"""Branch gating: a single 3x3 convolution over the concatenated source and
reference crops, reduced to simplex weights by a softmax, plus the convex
fusion of the branch parameter maps.

Two weight modes exist. "scalar" averages the conv response spatially and
softmaxes over the K output channels, giving one weight per branch.
"spatial" softmaxes the K channels at every location, giving a per-pixel
weight map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _ops
from .errors import ConfigError
from .tensor import FeatureMap

SCALAR = "scalar"
SPATIAL = "spatial"
GATE_MODES = (SCALAR, SPATIAL)

# concat orders for the gate input; the source-first order feeds the
# shift/mean weights, the reference-first order the scale/std weights
ORDER_FV = "fv"
ORDER_VF = "vf"


@dataclass(frozen=True)
class GateParams:
    """Weights of one gate: kernel (K, 2C, 3, 3), bias (K,), and mode."""

    kernel: np.ndarray
    bias: np.ndarray
    mode: str = SCALAR

    def __post_init__(self):
        kern = np.asarray(self.kernel, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if kern.ndim != 4 or kern.shape[2:] != (3, 3):
            raise ValueError(f"gate kernel must be (K, 2C, 3, 3), got {kern.shape}")
        if kern.shape[1] % 2 != 0:
            raise ValueError("gate kernel input channels must be even (a 2C concat)")
        if bias.shape != (kern.shape[0],):
            raise ValueError(f"gate bias must be ({kern.shape[0]},), got {bias.shape}")
        if not (np.isfinite(kern).all() and np.isfinite(bias).all()):
            raise ValueError("gate parameters must be finite")
        if self.mode not in GATE_MODES:
            raise ValueError(f"gate mode must be one of {GATE_MODES}, got {self.mode!r}")
        kern = kern.copy()
        bias = bias.copy()
        kern.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "kernel", kern)
        object.__setattr__(self, "bias", bias)

    @property
    def branches(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @classmethod
    def zeros(cls, channels: int, branches: int, mode: str = SCALAR) -> "GateParams":
        """All-zero gate: softmax of zeros yields uniform 1/K weights."""
        return cls(kernel=np.zeros((branches, 2 * channels, 3, 3)),
                   bias=np.zeros(branches), mode=mode)

    @classmethod
    def random(cls, channels: int, branches: int, mode: str = SCALAR,
               rng: np.random.Generator | int | None = None,
               scale: float = 0.1) -> "GateParams":
        rng = np.random.default_rng(rng)
        return cls(kernel=rng.normal(0.0, scale, (branches, 2 * channels, 3, 3)),
                   bias=rng.normal(0.0, scale, branches), mode=mode)


@dataclass(frozen=True)
class GateWeights:
    """Simplex weights over the K branches.

    scalar mode: values has shape (K,); spatial mode: (K, h, w) with a
    simplex at every location.
    """

    mode: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if self.mode == SCALAR:
            if vals.ndim != 1:
                raise ValueError(f"scalar gate weights must be 1-d, got shape {vals.shape}")
            sums = vals.sum()
        elif self.mode == SPATIAL:
            if vals.ndim != 3:
                raise ValueError(f"spatial gate weights must be 3-d, got shape {vals.shape}")
            sums = vals.sum(axis=0)
        else:
            raise ValueError(f"gate mode must be one of {GATE_MODES}, got {self.mode!r}")
        if (vals < 0).any():
            raise ValueError("gate weights must be nonnegative")
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise ValueError("gate weights must sum to 1")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def branches(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RegionGates:
    """The two gates of one region: one for the source-side (mean, std)
    fusion, one for the reference-side (shift, scale) fusion."""

    source: GateParams
    reference: GateParams

    def __post_init__(self):
        if self.source.mode != self.reference.mode:
            raise ValueError("source and reference gates must share a mode")
        if self.source.branches != self.reference.branches:
            raise ValueError("source and reference gates must share the branch count")
        if self.source.in_channels != self.reference.in_channels:
            raise ValueError("source and reference gates must share input channels")


def gate_forward(f_r: FeatureMap, v_r: FeatureMap, theta: GateParams,
                 order: str = ORDER_FV) -> GateWeights:
    """Branch weights from the concatenated crops.

    The caller must already have resized v_r to f_r's spatial shape.
    order selects the concatenation: "fv" puts the source first (used for
    the shift/mean weights), "vf" the reference first (scale/std weights).
    """
    if f_r.shape != v_r.shape:
        raise ValueError(f"crop shapes differ: {f_r.shape} vs {v_r.shape}")
    if order not in (ORDER_FV, ORDER_VF):
        raise ValueError(f"order must be 'fv' or 'vf', got {order!r}")
    if theta.in_channels != 2 * f_r.channels:
        raise ValueError(
            f"gate expects {theta.in_channels} input channels, crops give {2 * f_r.channels}")
    a, b = (f_r, v_r) if order == ORDER_FV else (v_r, f_r)
    z = _ops.conv3x3(np.concatenate([a.data, b.data], axis=0),
                     theta.kernel, theta.bias)
    if theta.mode == SCALAR:
        return GateWeights(SCALAR, _ops.softmax_vec(_ops.global_mean(z)))
    return GateWeights(SPATIAL, _ops.softmax_map(z))


def fuse_params(weights: GateWeights, branch_maps: Sequence[FeatureMap]) -> FeatureMap:
    """Convex combination of the K branch maps under the gate weights.

    Scalar weights broadcast over all positions; spatial weights multiply
    per location and broadcast over channels.
    """
    maps = list(branch_maps)
    if len(maps) != weights.branches:
        raise ValueError(
            f"got {len(maps)} branch maps for {weights.branches} weights")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError("branch maps must share a shape")
    if weights.mode == SPATIAL:
        if weights.values.shape[1:] != shape[1:]:
            raise ValueError(
                f"spatial weights {weights.values.shape[1:]} do not match maps {shape[1:]}")
        out = _ops.PLAIN.wsum_spatial(weights.values, [m.data for m in maps])
    else:
        out = _ops.PLAIN.wsum_scalar(weights.values, [m.data for m in maps])
    return FeatureMap(out)


def uniform_gates(branch_counts: Mapping[int, int], channels: int,
                  mode: str = SCALAR) -> dict[int, RegionGates]:
    """Zero-initialized gate pairs (uniform 1/K weights) for each region."""
    out = {}
    for rid, k in branch_counts.items():
        out[int(rid)] = RegionGates(source=GateParams.zeros(channels, k, mode),
                                    reference=GateParams.zeros(channels, k, mode))
    return out


def random_gates(branch_counts: Mapping[int, int], channels: int,
                 mode: str = SCALAR, rng: np.random.Generator | int | None = None,
                 scale: float = 0.1) -> dict[int, RegionGates]:
    """Seeded random gate pairs, for experiments and gradient checks."""
    rng = np.random.default_rng(rng)
    out = {}
    for rid in sorted(int(r) for r in branch_counts):
        k = branch_counts[rid]
        out[rid] = RegionGates(
            source=GateParams.random(channels, k, mode, rng, scale),
            reference=GateParams.random(channels, k, mode, rng, scale))
    return out


def _gate_to_dict(g: GateParams) -> dict:
    return {"mode": g.mode, "kernel": g.kernel.tolist(), "bias": g.bias.tolist()}


def _gate_from_dict(d: dict, where: str) -> GateParams:
    try:
        kern = np.asarray(d["kernel"], dtype=np.float64)
        bias = np.asarray(d["bias"], dtype=np.float64)
        mode = d.get("mode", SCALAR)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad gate entry at {where}: {exc}") from None
    try:
        return GateParams(kernel=kern, bias=bias, mode=mode)
    except ValueError as exc:
        raise ConfigError(f"bad gate entry at {where}: {exc}") from None


def gates_to_json(gates: Mapping[int, RegionGates]) -> str:
    doc = {str(rid): {"source": _gate_to_dict(rg.source),
                      "reference": _gate_to_dict(rg.reference)}
           for rid, rg in sorted(gates.items())}
    return json.dumps(doc, indent=2)


def gates_from_json(text: str) -> dict[int, RegionGates]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"gate file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("gate file must be a JSON object keyed by region id")
    out = {}
    for key, entry in doc.items():
        try:
            rid = int(key)
        except ValueError:
            raise ConfigError(f"gate region key {key!r} is not an integer") from None
        if not isinstance(entry, dict) or set(entry) != {"source", "reference"}:
            raise ConfigError(
                f"gate entry for region {rid} needs exactly 'source' and 'reference'")
        try:
            out[rid] = RegionGates(
                source=_gate_from_dict(entry["source"], f"region {rid} source"),
                reference=_gate_from_dict(entry["reference"], f"region {rid} reference"))
        except ValueError as exc:
            raise ConfigError(f"bad gates for region {rid}: {exc}") from None
    return out


def save_gates(gates: Mapping[int, RegionGates], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(gates_to_json(gates) + "\n")


def load_gates(path) -> dict[int, RegionGates]:
    with open(path, encoding="utf-8") as fh:
        return gates_from_json(fh.read())
