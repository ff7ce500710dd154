"""Feynman-Kac functional and the Picard construction of Lipschitz solutions.

The unknown U(t, x, p) lives on a regular grid as a ValueField with
multilinear interpolation.  picard_solve chains continuation windows; inside
each window the map U -> psi(t, G(., U), F(., U), b(., U), U_start) is
iterated to a fixed point over simulated characteristics.  Lipschitz-seminorm
growth of the iterate is monitored on the core noise-grid and declared a
blow-up when it crosses a threshold.

When no coefficient reads u the map does not depend on the iterate, so the
solution is a single functional application per output time; that path skips
windowing entirely and evaluates the initial datum in closed form at the
terminal points of the paths.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (
    AffineField,
    Box,
    CoefficientField,
    ModelError,
    ProblemSpec,
    default_buffer_width,
    lipschitz_table,
    validate_problem,
)
from .paths import FrozenCoefficients, MonteCarloConfig, feynman_kac_payoffs

__all__ = [
    "GridConfig",
    "ContinuationConfig",
    "ValueField",
    "SolveResult",
    "feynman_kac_apply",
    "picard_solve",
    "evaluate",
    "save_field",
    "load_field",
    "save_result",
    "load_result",
]

_MIN_WINDOW = 1e-9


@dataclass(frozen=True)
class GridConfig:
    """Node counts: per x-axis, per p-axis, and time sub-nodes per window."""

    nodes_x: int = 17
    nodes_p: int = 33
    nt_sub: int = 4

    def __post_init__(self):
        if self.nodes_x < 2 or self.nodes_p < 2:
            raise ModelError("grids need at least 2 nodes per axis")
        if self.nt_sub < 1:
            raise ModelError("nt_sub must be >= 1")


@dataclass(frozen=True)
class ContinuationConfig:
    """Window chaining and Picard stopping control."""

    window: Optional[float] = None
    tol: float = 1e-4
    max_iter: int = 40
    lip_max: Optional[float] = None
    damping: float = 0.0

    def __post_init__(self):
        if self.window is not None and not (self.window > 0):
            raise ModelError("window must be positive")
        if not (self.tol > 0):
            raise ModelError("tol must be positive")
        if self.max_iter < 1:
            raise ModelError("max_iter must be >= 1")
        if not (0.0 <= self.damping < 1.0):
            raise ModelError("damping must be in [0, 1)")


def _axis_info(axis: np.ndarray) -> tuple[float, float, int]:
    n = len(axis)
    if n < 2:
        raise ModelError("axes need at least 2 nodes")
    step = (axis[-1] - axis[0]) / (n - 1)
    if step <= 0 or not np.allclose(np.diff(axis), step, rtol=1e-9, atol=1e-12):
        raise ModelError("axes must be uniform and increasing")
    return float(axis[0]), float(step), n


def _multilinear(vals: np.ndarray, infos, pts: np.ndarray) -> np.ndarray:
    """Interpolate vals (*grid, d) at pts (N, k); clamps cell indices so
    queries on the boundary stay exact and outside points extend linearly."""
    k = len(infos)
    d = vals.shape[-1]
    idx, frac = [], []
    for a, (lo, step, n) in enumerate(infos):
        u = (pts[:, a] - lo) / step
        i = np.minimum(np.maximum(np.floor(u).astype(np.int64), 0), n - 2)
        idx.append(i)
        frac.append(u - i)
    # flat gather: one fancy index per corner on the raveled grid
    strides = []
    s = 1
    for a in range(k - 1, -1, -1):
        strides.append(s)
        s *= infos[a][2]
    strides = strides[::-1]
    base = idx[0] * strides[0]
    for a in range(1, k):
        base = base + idx[a] * strides[a]
    flat = vals.reshape(-1, d)
    out = 0.0
    for corner in itertools.product((0, 1), repeat=k):
        w = None
        off = 0
        for a, c in enumerate(corner):
            wa = frac[a] if c else 1.0 - frac[a]
            w = wa if w is None else w * wa
            if c:
                off += strides[a]
        out = out + w[:, None] * flat[base + off]
    return out


class ValueField:
    """Grid samples of U with multilinear interpolation in (t, x, p).

    values has shape (n_times, *x-nodes, *p-nodes, d).  p_core marks the node
    range of each p-axis that lies inside the requested noise box; nodes
    outside it belong to the truncation buffer and are excluded from
    Lipschitz diagnostics.
    """

    def __init__(self, time_nodes, x_axes, p_axes, values, p_core=None,
                 stderr=None):
        self.time_nodes = np.asarray(time_nodes, dtype=float)
        if self.time_nodes.ndim != 1 or np.any(np.diff(self.time_nodes) <= 0):
            if self.time_nodes.size != 1:
                raise ModelError("time nodes must be strictly increasing")
        self.x_axes = [np.asarray(a, dtype=float) for a in x_axes]
        self.p_axes = [np.asarray(a, dtype=float) for a in p_axes]
        self.values = np.asarray(values, dtype=float)
        self._infos = [_axis_info(a) for a in self.x_axes + self.p_axes]
        shape = ((self.time_nodes.size,) + tuple(len(a) for a in self.x_axes)
                 + tuple(len(a) for a in self.p_axes))
        if self.values.shape[:-1] != shape:
            raise ModelError(f"values shape {self.values.shape} does not match grid {shape}")
        self.p_core = (tuple((0, len(a)) for a in self.p_axes)
                       if p_core is None else tuple(tuple(c) for c in p_core))
        self.stderr = stderr
        self._dom = (Box([a[0] for a in self.x_axes], [a[-1] for a in self.x_axes]),
                     Box([a[0] for a in self.p_axes], [a[-1] for a in self.p_axes]))

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def n_x_axes(self) -> int:
        return len(self.x_axes)

    def domain(self) -> tuple[Box, Box]:
        return self._dom

    def core_block(self, vals: np.ndarray) -> np.ndarray:
        """Restrict a (*x-nodes, *p-nodes, d) slab to core p-nodes."""
        sel = ((slice(None),) * len(self.x_axes)
               + tuple(slice(c0, c1) for c0, c1 in self.p_core))
        return vals[sel]

    def slice_at(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.time_nodes - t)))
        if abs(self.time_nodes[j] - t) > 1e-12 * max(1.0, abs(t)):
            raise ModelError(f"{t} is not a stored time node")
        return self.values[j]

    def _spatial(self, vals, x, p):
        pts = np.concatenate([x, p], axis=-1)
        flat = pts.reshape(-1, pts.shape[-1])
        out = _multilinear(vals, self._infos, flat)
        return out.reshape(pts.shape[:-1] + (self.d,))

    def __call__(self, t, x, p, clamp: bool = False):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        tn = self.time_nodes
        t = float(t)
        if clamp:
            t = min(max(t, tn[0]), tn[-1])
            xbox, pbox = self.domain()
            x = xbox.clamp(x)
            p = pbox.clamp(p)
        if tn.size == 1:
            if abs(t - tn[0]) > 1e-12 * max(1.0, abs(t)):
                raise ModelError("field stores a single time slice")
            return self._spatial(self.values[0], x, p)
        j = int(np.searchsorted(tn, t, side="right")) - 1
        j = min(max(j, 0), tn.size - 2)
        w = (t - tn[j]) / (tn[j + 1] - tn[j])
        if w <= 0.0:
            vals = self.values[j]
        elif w >= 1.0:
            vals = self.values[j + 1]
        else:
            # blend the two slabs once, then interpolate spatially once
            vals = (1.0 - w) * self.values[j] + w * self.values[j + 1]
        return self._spatial(vals, x, p)


def evaluate(field: ValueField, t, x, p):
    """Interpolate the field; out-of-domain queries are an error."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    tn = field.time_nodes
    eps = 1e-12
    if not (tn[0] - eps <= float(t) <= tn[-1] + eps):
        raise ModelError(f"t={t} outside stored range [{tn[0]}, {tn[-1]}]")
    xbox, pbox = field.domain()
    if not xbox.contains(np.atleast_2d(x), atol=1e-12).all():
        raise ModelError("x outside the field domain")
    if not pbox.contains(np.atleast_2d(p), atol=1e-12).all():
        raise ModelError("p outside the field domain")
    return field(t, x, p)


@dataclass
class SolveResult:
    field: ValueField
    status: str  # Converged | BlowUp | MaxIterations
    blowup_time: Optional[float]
    picard_residuals: list
    grad_history: list  # (t, dx_norm, dp_norm) per stored time node
    clamp_rate: float
    window_edges: list

    def __post_init__(self):
        if self.status not in ("Converged", "BlowUp", "MaxIterations"):
            raise ModelError(f"unknown status {self.status!r}")
        if self.status == "BlowUp" and self.blowup_time is None:
            raise ModelError("BlowUp requires blowup_time")


# ---------------------------------------------------------------------------
# Grid plumbing
# ---------------------------------------------------------------------------


def _grid_starts(x_axes, p_axes):
    mesh = np.meshgrid(*x_axes, *p_axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    dx = len(x_axes)
    return pts[:, :dx], pts[:, dx:]


def _extended_axis(axis: np.ndarray, width: float) -> tuple[np.ndarray, tuple[int, int]]:
    """Prepend/append enough uniform nodes to cover width on both sides."""
    lo, step, n = _axis_info(axis)
    k = int(math.ceil(width / step - 1e-12)) if width > 0 else 0
    if k == 0:
        return axis, (0, n)
    ext = (np.arange(n + 2 * k) - k) * step + lo
    return ext, (k, k + n)


def _grad_norms_slab(vals, x_axes, p_axes, p_core):
    """Max finite-difference quotient per variable group on core p-nodes."""
    sel = (slice(None),) * len(x_axes) + tuple(slice(c0, c1) for c0, c1 in p_core)
    core = vals[sel]
    dx = 0.0
    for a, ax in enumerate(x_axes):
        step = (ax[-1] - ax[0]) / (len(ax) - 1)
        if len(ax) > 1:
            dx = max(dx, float(np.abs(np.diff(core, axis=a)).max()) / step)
    dp = 0.0
    off = len(x_axes)
    for a, ax in enumerate(p_axes):
        c0, c1 = p_core[a]
        if c1 - c0 > 1:
            step = (ax[-1] - ax[0]) / (len(ax) - 1)
            dp = max(dp, float(np.abs(np.diff(core, axis=off + a)).max()) / step)
    return dx, dp


def _coef_eval(coef: CoefficientField, x, p, u=None):
    return coef(x if "x" in coef.reads else None,
                p if "p" in coef.reads else None,
                u if "u" in coef.reads else None)


def _fast_field_eval(coef: CoefficientField) -> Callable:
    """(x, p, u) -> value, skipping per-call validation on the hot path."""
    if isinstance(coef, AffineField) and coef.out_shape == (coef.out_dim,):
        const = coef.const
        mats = [(b, coef.mats[b].T.copy()) for b in ("x", "p", "u") if b in coef.mats]

        def ev(x, p, u=None):
            args = {"x": x, "p": p, "u": u}
            out = None
            for b, mt in mats:
                term = args[b] @ mt
                out = term if out is None else out + term
            return const if out is None else out + const

        return ev
    return lambda x, p, u=None: _coef_eval(coef, x, p, u)


def _wrap_terminal(u0) -> Callable:
    if isinstance(u0, CoefficientField):
        fast = _fast_field_eval(u0)
        return lambda x, p: fast(x, p)
    return u0


# ---------------------------------------------------------------------------
# Public single application
# ---------------------------------------------------------------------------


def feynman_kac_apply(a, b1, b2, u0, t: float, grid: GridConfig,
                      mc: MonteCarloConfig, discount: float = 0.0, *,
                      x_box: Box, p_box: Box, sigma: float = 0.0,
                      volatility=None, p_clamp: Optional[Box] = None,
                      stream_prefix: tuple = ()) -> ValueField:
    """One application of the characteristics functional on a fresh grid.

    a, b1, b2 are callables (t_rem, x, p) or None for zero; u0 is a
    CoefficientField or a callable (x, p).  Returns the value surface at
    time t as a single-slice ValueField with Monte Carlo standard errors
    attached.
    """
    x_axes = x_box.grid_axes(grid.nodes_x)
    p_axes = p_box.grid_axes(grid.nodes_p)
    frozen = FrozenCoefficients(x_box=x_box, p_box=p_clamp or p_box,
                                sigma=sigma, b1=b1, b2=b2, volatility=volatility)
    xs, ps = _grid_starts(x_axes, p_axes)
    stats = feynman_kac_payoffs(frozen, a, _wrap_terminal(u0), t, xs, ps, mc,
                                discount=discount, stream_prefix=stream_prefix)
    shape = tuple(len(ax) for ax in x_axes) + tuple(len(ax) for ax in p_axes)
    d = stats.mean.shape[-1]
    return ValueField([t], x_axes, p_axes, stats.mean.reshape((1,) + shape + (d,)),
                      stderr=stats.stderr.reshape(shape + (d,)))


# ---------------------------------------------------------------------------
# Picard solve
# ---------------------------------------------------------------------------


def _max_table_bound(table: dict, names=("f", "g", "b", "u0", "volatility")) -> float:
    best = 0.0
    for nm in names:
        for v in table.get(nm, {}).values():
            best = max(best, float(v))
    return best


def _mc_effective(mc: MonteCarloConfig, has_noise: bool, dt: Optional[float]) -> MonteCarloConfig:
    changes = {}
    if not has_noise:
        changes.update(n_paths=1, antithetic=False)
    if mc.dt is None and dt is not None:
        changes["dt"] = dt
    return dataclasses.replace(mc, **changes) if changes else mc


def _diverging(residuals: list) -> bool:
    r = residuals
    if len(r) < 4:
        return False
    return r[-1] > r[-2] > r[-3] and r[-1] > 10.0 * min(r)


def picard_solve(spec: ProblemSpec, grid: GridConfig, mc: MonteCarloConfig,
                 ctrl: ContinuationConfig, force: bool = False) -> SolveResult:
    """Construct the value field on [0, horizon] by window continuation."""
    report = validate_problem(spec)
    if not report.passed and not force:
        x, p, u, flux = report.boundary_violations[0]
        raise ModelError(
            "invariance condition fails on the state box "
            f"(inward flux {flux:.3g} at x={x}, p={p}, u={u}); pass force=True to proceed")
    table = report.lipschitz_table
    T = spec.horizon
    has_noise = spec.sigma > 0 or spec.volatility is not None
    iterate_dep = any("u" in c.reads for c in (spec.f_coef, spec.g_coef, spec.b_coef))

    lip_u0 = max(table["u0"].values())
    lip_max = ctrl.lip_max if ctrl.lip_max is not None else 1e3 * (1.0 + lip_u0)
    L0 = _max_table_bound(table)

    x_axes = spec.omega.grid_axes(grid.nodes_x)
    core_axes = spec.p_box.grid_axes(grid.nodes_p)

    if not iterate_dep:
        return _solve_direct(spec, grid, mc, ctrl, x_axes, core_axes, T, has_noise)

    buffer = default_buffer_width(spec) if has_noise or not spec.b_coef.is_zero else 0.0
    p_axes, p_core = [], []
    for ax in core_axes:
        ext, core = _extended_axis(ax, buffer)
        p_axes.append(ext)
        p_core.append(core)
    p_clamp = Box([a[0] for a in p_axes], [a[-1] for a in p_axes]) \
        if any(len(e) > len(c) for e, c in zip(p_axes, core_axes)) else spec.p_box
    xs, ps = _grid_starts(x_axes, p_axes)
    grid_shape = tuple(len(a) for a in x_axes) + tuple(len(a) for a in p_axes)
    d = spec.d

    u0_vals = _coef_eval(spec.u0, xs, ps).reshape(grid_shape + (d,))
    times = [0.0]
    slices = [u0_vals]
    grads = [_grad_norms_slab(u0_vals, x_axes, p_axes, p_core)]
    residual_log = []
    window_edges = [0.0]
    clamp_events = 0
    clamp_rows = 0
    status = "Converged"
    blowup_time = None
    L_cur = max(L0, max(grads[0]))
    t_cur = 0.0
    init_slice = u0_vals
    win_idx = 0

    while t_cur < T - 1e-12:
        remaining = T - t_cur
        w_len = ctrl.window if ctrl.window is not None else 0.25 / (1.0 + L_cur)
        w_len = min(remaining, w_len)
        if w_len < _MIN_WINDOW:
            status = "BlowUp"
            blowup_time = t_cur
            break
        nt = grid.nt_sub
        sub = w_len * np.arange(nt + 1) / nt
        # each payoff application falls back to its own horizon/128 step
        mc_eff = _mc_effective(mc, has_noise, None)

        if win_idx == 0:
            init_eval = _wrap_terminal(spec.u0)
        else:
            init_field = ValueField([0.0], x_axes, p_axes, init_slice[None], p_core=p_core)
            init_eval = lambda x, p, _f=init_field: _f(0.0, x, p, clamp=True)

        local = np.repeat(init_slice[None], nt + 1, axis=0)
        win_resid = []
        converged = not iterate_dep
        for _ in range(ctrl.max_iter):
            cur_field = ValueField(sub, x_axes, p_axes, local, p_core=p_core)
            new = local.copy()
            for j in range(1, nt + 1):
                a_fn, b1_fn, b2_fn = _freeze_coefficients(spec, cur_field)
                frozen = FrozenCoefficients(x_box=spec.omega, p_box=p_clamp,
                                            sigma=spec.sigma, b1=b1_fn, b2=b2_fn,
                                            volatility=_freeze_volatility(spec, cur_field))
                stats = feynman_kac_payoffs(frozen, a_fn, init_eval, float(sub[j]),
                                            xs, ps, mc_eff, discount=spec.discount,
                                            stream_prefix=(win_idx, j))
                new[j] = stats.mean.reshape(grid_shape + (d,))
                clamp_events += stats.clamp_events
                clamp_rows += stats.n_rows * max(stats.n_steps, 1)
            if ctrl.damping:
                new[1:] = (1.0 - ctrl.damping) * new[1:] + ctrl.damping * local[1:]
            resid = float(np.abs(new - local).max())
            win_resid.append(resid)
            local = new
            if resid <= ctrl.tol:
                converged = True
                break
            if _diverging(win_resid):
                status = "BlowUp"
                blowup_time = t_cur
                break
        residual_log.append(win_resid)
        if status == "BlowUp":
            break
        if not converged:
            status = "MaxIterations"

        sem_max = 0.0
        for j in range(1, nt + 1):
            g = _grad_norms_slab(local[j], x_axes, p_axes, p_core)
            grads.append(g)
            times.append(t_cur + float(sub[j]))
            slices.append(local[j])
            sem_max = max(sem_max, *g)
        window_edges.append(t_cur + w_len)
        if sem_max > lip_max:
            status = "BlowUp"
            blowup_time = t_cur
            break
        if status == "MaxIterations":
            break
        t_cur += w_len
        init_slice = local[nt]
        L_cur = max(L0, sem_max)
        win_idx += 1

    field = ValueField(times, x_axes, p_axes, np.stack(slices), p_core=p_core)
    rate = clamp_events / clamp_rows if clamp_rows else 0.0
    return SolveResult(field=field, status=status, blowup_time=blowup_time,
                       picard_residuals=residual_log,
                       grad_history=[(t, g[0], g[1]) for t, g in zip(times, grads)],
                       clamp_rate=rate, window_edges=window_edges)


def _freeze_coefficients(spec: ProblemSpec, iterate: ValueField):
    """Close F, G, b over the current iterate as (t_rem, x, p) callables."""

    def value(t_rem, x, p):
        return iterate(t_rem, x, p, clamp=True)

    def make(coef):
        if coef.is_zero:
            return None
        fast = _fast_field_eval(coef)
        if "u" in coef.reads:
            return lambda tr, x, p: fast(x, p, value(tr, x, p))
        return lambda tr, x, p: fast(x, p)

    return make(spec.g_coef), make(spec.f_coef), make(spec.b_coef)


def _freeze_volatility(spec: ProblemSpec, iterate: ValueField):
    vol = spec.volatility
    if vol is None:
        return None
    if "u" in vol.reads:
        return lambda tr, x, p: _coef_eval(vol, x, p, iterate(tr, x, p, clamp=True))
    return lambda tr, x, p: _coef_eval(vol, x, p)


def _solve_direct(spec, grid, mc, ctrl, x_axes, p_axes, T, has_noise):
    """No coefficient reads u: one exact functional application per time node."""
    xs, ps = _grid_starts(x_axes, p_axes)
    grid_shape = tuple(len(a) for a in x_axes) + tuple(len(a) for a in p_axes)
    d = spec.d
    buffer = default_buffer_width(spec) if has_noise or not spec.b_coef.is_zero else 0.0
    p_clamp = Box([a[0] for a in p_axes], [a[-1] for a in p_axes]).expand(buffer) \
        if buffer > 0 else Box([a[0] for a in p_axes], [a[-1] for a in p_axes])
    def time_free(coef):
        if coef is None or coef.is_zero:
            return None
        fast = _fast_field_eval(coef)
        return lambda tr, x, p: fast(x, p)

    b1_fn = time_free(spec.f_coef)
    b2_fn = time_free(spec.b_coef)
    a_fn = time_free(spec.g_coef)
    vol_fn = None if spec.volatility is None else (lambda tr, x, p: _coef_eval(spec.volatility, x, p))
    frozen = FrozenCoefficients(x_box=spec.omega, p_box=p_clamp, sigma=spec.sigma,
                                b1=b1_fn, b2=b2_fn, volatility=vol_fn)
    u0_eval = _wrap_terminal(spec.u0)

    u0_vals = _coef_eval(spec.u0, xs, ps).reshape(grid_shape + (d,))
    times = [0.0]
    slices = [u0_vals]
    grads = [_grad_norms_slab(u0_vals, x_axes, p_axes, [(0, len(a)) for a in p_axes])]
    clamp_events = 0
    clamp_rows = 0
    nt = grid.nt_sub
    for j in range(1, nt + 1):
        tj = T * j / nt
        mc_eff = _mc_effective(mc, has_noise, None)
        stats = feynman_kac_payoffs(frozen, a_fn, u0_eval, tj, xs, ps, mc_eff,
                                    discount=spec.discount, stream_prefix=(0, j))
        slices.append(stats.mean.reshape(grid_shape + (d,)))
        times.append(tj)
        grads.append(_grad_norms_slab(slices[-1], x_axes, p_axes,
                                      [(0, len(a)) for a in p_axes]))
        clamp_events += stats.clamp_events
        clamp_rows += stats.n_rows * max(stats.n_steps, 1)
    field = ValueField(times, x_axes, p_axes, np.stack(slices))
    rate = clamp_events / clamp_rows if clamp_rows else 0.0
    return SolveResult(field=field, status="Converged", blowup_time=None,
                       picard_residuals=[[0.0]],
                       grad_history=[(t, g[0], g[1]) for t, g in zip(times, grads)],
                       clamp_rate=rate, window_edges=[0.0, T])


# ---------------------------------------------------------------------------
# Serialization: .npy values + JSON sidecar
# ---------------------------------------------------------------------------


def _field_meta(field: ValueField) -> dict:
    return {
        "time_nodes": [float(t) for t in field.time_nodes],
        "x_axes": [{"lo": i[0], "step": i[1], "n": i[2]}
                   for i in [_axis_info(a) for a in field.x_axes]],
        "p_axes": [{"lo": i[0], "step": i[1], "n": i[2]}
                   for i in [_axis_info(a) for a in field.p_axes]],
        "p_core": [list(c) for c in field.p_core],
    }


def _axes_from_meta(entries) -> list[np.ndarray]:
    return [e["lo"] + e["step"] * np.arange(e["n"]) for e in entries]


def save_field(field: ValueField, basepath) -> tuple[str, str]:
    """Write values to <base>.npy and grid metadata to <base>.json."""
    base = str(basepath)
    npy, meta = base + ".npy", base + ".json"
    np.save(npy, field.values)
    with open(meta, "w") as fh:
        json.dump(_field_meta(field), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return npy, meta


def load_field(basepath) -> ValueField:
    base = str(basepath)
    values = np.load(base + ".npy")
    with open(base + ".json") as fh:
        meta = json.load(fh)
    return ValueField(meta["time_nodes"], _axes_from_meta(meta["x_axes"]),
                      _axes_from_meta(meta["p_axes"]), values,
                      p_core=meta.get("p_core"))


def save_result(result: SolveResult, basepath) -> list[str]:
    """Field binary + sidecar, summary JSON, and CSV traces.

    CSVs: <base>_grads.csv with per-time gradient norms and
    <base>_residuals.csv with the per-window Picard residual traces.
    """
    base = str(basepath)
    files = list(save_field(result.field, base + "_field"))
    summary = {
        "status": result.status,
        "blowup_time": result.blowup_time,
        "picard_residuals": result.picard_residuals,
        "grad_history": [[t, dx, dp] for t, dx, dp in result.grad_history],
        "clamp_rate": result.clamp_rate,
        "window_edges": result.window_edges,
    }
    path = base + "_result.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    files.append(path)
    gpath = base + "_grads.csv"
    with open(gpath, "w") as fh:
        fh.write("t,dx_norm,dp_norm\n")
        for t, dx, dp in result.grad_history:
            fh.write(f"{float(t)!r},{float(dx)!r},{float(dp)!r}\n")
    files.append(gpath)
    rpath = base + "_residuals.csv"
    with open(rpath, "w") as fh:
        fh.write("window,iteration,residual\n")
        for w, trace in enumerate(result.picard_residuals):
            for i, r in enumerate(trace):
                fh.write(f"{w},{i},{float(r)!r}\n")
    files.append(rpath)
    return files


def load_result(basepath) -> SolveResult:
    base = str(basepath)
    field = load_field(base + "_field")
    with open(base + "_result.json") as fh:
        s = json.load(fh)
    return SolveResult(field=field, status=s["status"], blowup_time=s["blowup_time"],
                       picard_residuals=s["picard_residuals"],
                       grad_history=[tuple(g) for g in s["grad_history"]],
                       clamp_rate=s["clamp_rate"], window_edges=s["window_edges"])
