"""Reverse-mode gradients through the transfer pipeline.

A minimal tape records the pipeline's primitive ops (crop, block moments,
resize, concat, conv, softmax, fusion, merge, elementwise arithmetic) and
replays their vector-Jacobian products in reverse. The pipeline itself is
the same code that runs the plain forward pass (see transfer._pipeline),
parametrized over an ops provider, so the differentiated computation is
the computation being checked.

Everything is validated against central finite differences; see
``finite_diff_grad`` and ``gradcheck_report``. Masks and block boundaries
are non-differentiable constants. Nearest-neighbor resizing is piecewise
constant, so gradient checks run in bilinear mode only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import _kernels, _ops
from ._ops import PLAIN
from .gates import RegionGates
from .masks import SegMask
from .tensor import FeatureMap
from .transfer import TransferConfig, _check_gates, _pipeline

FD_STEP = 1e-5
FD_TOLERANCE = 1e-5
# relative-error denominator floor; errors are |a-b| / max(|a|, |b|, this)
REL_FLOOR = 1e-8


class Var:
    """A tape-tracked array."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


class Tape:
    """Append-only op record; append order is a topological order."""

    def __init__(self):
        self._records = []

    def leaf(self, value) -> Var:
        return Var(np.asarray(value, dtype=np.float64))

    def record(self, value, parents, vjp) -> Var:
        out = Var(value)
        self._records.append((out, parents, vjp))
        return out

    def backward(self, out: Var, seed: np.ndarray) -> dict:
        """Accumulated gradients keyed by id(var), seeded at ``out``."""
        grads = {id(out): np.asarray(seed, dtype=np.float64)}
        for var, parents, vjp in reversed(self._records):
            g = grads.pop(id(var), None)
            if g is None:
                continue
            for parent, pg in zip(parents, vjp(g)):
                if parent is None or pg is None:
                    continue
                cur = grads.get(id(parent))
                grads[id(parent)] = pg if cur is None else cur + pg
        return grads


def _v(x):
    return x.value if isinstance(x, Var) else x


def _p(x):
    return x if isinstance(x, Var) else None


class TapeOps:
    """Ops protocol that mirrors _ops.PlainOps but records VJPs."""

    def __init__(self, tape: Tape):
        self.tape = tape

    def value(self, x):
        return _v(x)

    def _emit(self, value, operands, vjp):
        if not any(isinstance(o, Var) for o in operands):
            return value
        return self.tape.record(value, tuple(_p(o) for o in operands), vjp)

    def crop(self, x, bbox):
        xv = _v(x)
        r0, c0, h, w = bbox
        val = np.ascontiguousarray(xv[:, r0:r0 + h, c0:c0 + w])
        shape = xv.shape

        def vjp(u):
            g = np.zeros(shape)
            g[:, r0:r0 + h, c0:c0 + w] = u
            return (g,)

        return self._emit(val, (x,), vjp)

    def merge(self, base, patch, bbox, inside):
        bv, pv = _v(base), _v(patch)
        r0, c0, h, w = bbox
        val = bv.copy()
        val[:, r0:r0 + h, c0:c0 + w][:, inside] = pv[:, inside]
        pshape = pv.shape

        def vjp(u):
            db = u.copy()
            db[:, r0:r0 + h, c0:c0 + w][:, inside] = 0.0
            dp = np.zeros(pshape)
            dp[:, inside] = u[:, r0:r0 + h, c0:c0 + w][:, inside]
            return (db, dp)

        return self._emit(val, (base, patch), vjp)

    def block_mean(self, x, grid, weights, counts):
        xv = _v(x)
        val = PLAIN.block_mean(xv, grid, weights, counts)
        _, h, w = xv.shape

        def vjp(u):
            g = _kernels.block_expand(u / counts, h, w)
            if weights is not None:
                g = g * weights[None]
            return (g,)

        return self._emit(val, (x,), vjp)

    def expand(self, m, h, w):
        mv = _v(m)
        gh, gw = mv.shape[1], mv.shape[2]

        def vjp(u):
            return (_kernels.block_sum(u, gh, gw),)

        return self._emit(_kernels.block_expand(mv, h, w), (m,), vjp)

    def add(self, a, b):
        def vjp(u):
            return (u, u)

        return self._emit(_v(a) + _v(b), (a, b), vjp)

    def sub(self, a, b):
        def vjp(u):
            return (u, -u)

        return self._emit(_v(a) - _v(b), (a, b), vjp)

    def mul(self, a, b):
        av, bv = _v(a), _v(b)

        def vjp(u):
            return (u * bv, u * av)

        return self._emit(av * bv, (a, b), vjp)

    def div(self, a, b):
        av, bv = _v(a), _v(b)
        val = av / bv

        def vjp(u):
            return (u / bv, -u * val / bv)

        return self._emit(val, (a, b), vjp)

    def sqrt_plus(self, x, c):
        val = np.sqrt(_v(x) + c)

        def vjp(u):
            return (u / (2.0 * val),)

        return self._emit(val, (x,), vjp)

    def resize(self, x, oh, ow, mode):
        xv = _v(x)
        _, ih, iw = xv.shape

        def vjp(u):
            return (_ops.resize_adjoint(u, ih, iw, mode),)

        return self._emit(_ops.resize(xv, oh, ow, mode), (x,), vjp)

    def concat(self, a, b):
        av, bv = _v(a), _v(b)
        ca = av.shape[0]

        def vjp(u):
            return (u[:ca], u[ca:])

        return self._emit(np.concatenate([av, bv], axis=0), (a, b), vjp)

    def conv3x3(self, x, kern, bias):
        xv, kv, bv = _v(x), _v(kern), _v(bias)
        val = _ops.conv3x3(xv, kv, bv)

        def vjp(u):
            return (_ops.conv3x3_input_vjp(u, kv),
                    _ops.conv3x3_kernel_vjp(u, xv),
                    u.sum(axis=(1, 2)))

        return self._emit(val, (x, kern, bias), vjp)

    def global_mean(self, x):
        xv = _v(x)
        _, h, w = xv.shape

        def vjp(u):
            g = np.empty(xv.shape)
            g[:] = (u / (h * w))[:, None, None]
            return (g,)

        return self._emit(_ops.global_mean(xv), (x,), vjp)

    def softmax_vec(self, z):
        val = _ops.softmax_vec(_v(z))

        def vjp(u):
            return (val * (u - np.dot(u, val)),)

        return self._emit(val, (z,), vjp)

    def softmax_map(self, z):
        val = _ops.softmax_map(_v(z))

        def vjp(u):
            return (val * (u - (u * val).sum(axis=0)),)

        return self._emit(val, (z,), vjp)

    def wsum_scalar(self, wv, maps):
        wvv = _v(wv)
        mvals = [_v(m) for m in maps]
        out = wvv[0] * mvals[0]
        for k in range(1, len(mvals)):
            out = out + wvv[k] * mvals[k]

        def vjp(u):
            dw = np.array([np.vdot(u, mv) for mv in mvals])
            return (dw, *[wvv[k] * u for k in range(len(mvals))])

        return self._emit(out, (wv, *maps), vjp)

    def wsum_spatial(self, wm, maps):
        wmv = _v(wm)
        mvals = [_v(m) for m in maps]
        out = wmv[0][None] * mvals[0]
        for k in range(1, len(mvals)):
            out = out + wmv[k][None] * mvals[k]

        def vjp(u):
            dw = np.stack([(u * mv).sum(axis=0) for mv in mvals])
            return (dw, *[wmv[k][None] * u for k in range(len(mvals))])

        return self._emit(out, (wm, *maps), vjp)


@dataclass(frozen=True)
class GateGrad:
    """Gradient arrays mirroring one GateParams."""

    kernel: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class GradBundle:
    """Gradients of <upstream, output> w.r.t. the pipeline inputs."""

    d_source: FeatureMap
    d_reference: FeatureMap
    d_gates: dict[int, dict[str, GateGrad]]


def transfer_vjp(f: FeatureMap, v: FeatureMap, mask_f: SegMask, mask_v: SegMask,
                 config: TransferConfig, gates: Mapping[int, RegionGates],
                 upstream: FeatureMap) -> GradBundle:
    """Vector-Jacobian product of transfer_features at (f, v, gates).

    upstream must have the output's shape (= f's shape). Returns the
    gradients for f, v, and every gate's kernel/bias; gates of regions the
    pipeline never touches get zero gradients.
    """
    if f.channels != v.channels:
        raise ValueError(f"maps disagree on channels: {f.channels} vs {v.channels}")
    if (f.height, f.width) != mask_f.shape:
        raise ValueError("source mask does not match the source map")
    if (v.height, v.width) != mask_v.shape:
        raise ValueError("reference mask does not match the reference map")
    if upstream.shape != f.shape:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match output shape {f.shape}")
    _check_gates(config, gates, f.channels)

    tape = Tape()
    ops = TapeOps(tape)
    f_var = tape.leaf(f.data)
    v_var = tape.leaf(v.data)
    gate_vars = {}
    for rid in sorted(config.regions):
        rg = gates[rid]
        gate_vars[rid] = (tape.leaf(rg.source.kernel), tape.leaf(rg.source.bias),
                          tape.leaf(rg.reference.kernel), tape.leaf(rg.reference.bias))
    out = _pipeline(ops, f_var, v_var, mask_f.labels, mask_v.labels,
                    config, gate_vars)
    grads = tape.backward(out, upstream.data)

    def grad_of(var, shape):
        g = grads.get(id(var))
        return np.zeros(shape) if g is None else g

    d_gates = {}
    for rid, (sk, sb, rk, rb) in gate_vars.items():
        rg = gates[rid]
        d_gates[rid] = {
            "source": GateGrad(kernel=grad_of(sk, rg.source.kernel.shape),
                               bias=grad_of(sb, rg.source.bias.shape)),
            "reference": GateGrad(kernel=grad_of(rk, rg.reference.kernel.shape),
                                  bias=grad_of(rb, rg.reference.bias.shape)),
        }
    return GradBundle(d_source=FeatureMap(grad_of(f_var, f.shape)),
                      d_reference=FeatureMap(grad_of(v_var, v.shape)),
                      d_gates=d_gates)


def finite_diff_grad(fn: Callable[[np.ndarray], float], x: np.ndarray,
                     step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by
    coordinate: (fn(x + h e_i) - fn(x - h e_i)) / (2 h)."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += step
        fp = fn(xp)
        xm = x.copy()
        xm[i] -= step
        fm = fn(xm)
        grad[i] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise |a - b| / max(|a|, |b|, 1e-8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_FLOOR)
    return np.abs(a - b) / denom


def _pack_gates(gates, region_ids):
    parts = []
    for rid in region_ids:
        rg = gates[rid]
        parts += [rg.source.kernel.ravel(), rg.source.bias.ravel(),
                  rg.reference.kernel.ravel(), rg.reference.bias.ravel()]
    return np.concatenate(parts) if parts else np.zeros(0)


def _pack_gate_grads(bundle, gates, region_ids):
    parts = []
    for rid in region_ids:
        gg = bundle.d_gates[rid]
        parts += [gg["source"].kernel.ravel(), gg["source"].bias.ravel(),
                  gg["reference"].kernel.ravel(), gg["reference"].bias.ravel()]
    return np.concatenate(parts) if parts else np.zeros(0)


def check_instance_gradients(f, v, mask_f, mask_v, config, gates, upstream,
                             step: float = FD_STEP) -> dict[str, float]:
    """Max relative error of the analytic VJP vs finite differences,
    per parameter group ('source', 'reference', 'gates')."""
    bundle = transfer_vjp(f, v, mask_f, mask_v, config, gates, upstream)
    rids = sorted(config.regions)

    n_f, n_v = f.data.size, v.data.size
    x0 = np.concatenate([f.data.ravel(), v.data.ravel(), _pack_gates(gates, rids)])
    f_shape, v_shape = f.shape, v.shape
    mf_labels, mv_labels = mask_f.labels, mask_v.labels
    up = upstream.data

    def closure(vec):
        fa = vec[:n_f].reshape(f_shape)
        va = vec[n_f:n_f + n_v].reshape(v_shape)
        table = {}
        pos = n_f + n_v
        for rid in rids:
            rg = gates[rid]
            arrs = []
            for ref in (rg.source.kernel, rg.source.bias,
                        rg.reference.kernel, rg.reference.bias):
                arrs.append(vec[pos:pos + ref.size].reshape(ref.shape))
                pos += ref.size
            table[rid] = tuple(arrs)
        out = _pipeline(PLAIN, fa, va, mf_labels, mv_labels, config, table)
        return float(np.vdot(up, out))

    numeric = finite_diff_grad(closure, x0, step)
    analytic = np.concatenate([bundle.d_source.data.ravel(),
                               bundle.d_reference.data.ravel(),
                               _pack_gate_grads(bundle, gates, rids)])
    rel = relative_error(analytic, numeric)
    errs = {
        "source": float(rel[:n_f].max()),
        "reference": float(rel[n_f:n_f + n_v].max()),
    }
    errs["gates"] = float(rel[n_f + n_v:].max()) if rel.size > n_f + n_v else 0.0
    return errs


def gradcheck_report(seed: int, trials: int, step: float = FD_STEP,
                     tolerance: float = FD_TOLERANCE) -> dict:
    """Randomized analytic-vs-numeric gradient check.

    Runs ``trials`` seeded instances spanning both gate modes, one to
    three branches, and mixed level lists including "half". Trial i is a
    pure function of (seed, i), so growing ``trials`` never changes
    earlier results. The report is JSON-serializable with stable key
    order and passes iff every group error is <= tolerance.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    from .testing import make_gradcheck_instance

    children = np.random.SeedSequence(seed).spawn(trials)
    trial_reports = []
    worst = {"source": 0.0, "reference": 0.0, "gates": 0.0}
    for t, child in enumerate(children):
        rng = np.random.default_rng(child)
        inst = make_gradcheck_instance(rng, t)
        errs = check_instance_gradients(inst["f"], inst["v"], inst["mask_f"],
                                        inst["mask_v"], inst["config"],
                                        inst["gates"], inst["upstream"],
                                        step=step)
        for key in worst:
            worst[key] = max(worst[key], errs[key])
        trial_reports.append({
            "trial": t,
            "channels": inst["f"].channels,
            "height": inst["f"].height,
            "width": inst["f"].width,
            "gate_mode": inst["config"].gate_mode,
            "regions": len(inst["config"].regions),
            "branches": sorted(spec.branches
                               for spec in inst["config"].regions.values()),
            "max_rel_err": {k: errs[k] for k in ("source", "reference", "gates")},
            "pass": all(errs[k] <= tolerance for k in errs),
        })
    return {
        "seed": int(seed),
        "trials": int(trials),
        "step": step,
        "tolerance": tolerance,
        "max_rel_err": worst,
        "pass": all(worst[k] <= tolerance for k in worst),
        "trial_reports": trial_reports,
    }
