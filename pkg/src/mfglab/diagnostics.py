"""Regularity diagnostics: gradient norms vs bound curves, the Z monitor,
and a uniqueness probe.

The theory provides exact bounds for exact solutions; a computed field adds
interpolation error and Monte Carlo noise on top, so every comparison here is
reported against an explicit numerical budget instead of as a raw inequality.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Box, ModelError, ProblemSpec, SamplerConfig, lipschitz_table
from .solver import (
    ContinuationConfig,
    GridConfig,
    ValueField,
    _grad_norms_slab,
    picard_solve,
)
from .streams import stream

__all__ = [
    "BetaSchedule",
    "BoundCurves",
    "ZSample",
    "lambda_beta_star",
    "grad_norms",
    "bound_curves",
    "z_monitor",
    "uniqueness_probe",
    "save_bound_curves",
    "save_z_histogram",
]

_Z_CHANNEL = 21


@dataclass(frozen=True)
class BetaSchedule:
    """Exponentially decaying comparison weight beta(t) = beta0 e^{-lambda t}."""

    beta0: float
    lambda_beta: float

    def __post_init__(self):
        if not (self.beta0 > 0):
            raise ModelError("beta0 must be positive")
        if self.lambda_beta < 0:
            raise ModelError("lambda_beta must be nonnegative")

    def __call__(self, t):
        return self.beta0 * np.exp(-self.lambda_beta * np.asarray(t, dtype=float))


def lambda_beta_star(spec: ProblemSpec, seed: int = 0) -> float:
    """Smallest decay rate the x-gradient estimate supports:
    |D_x G|^2 + 2 |D_x F| from the Lipschitz table."""
    table = lipschitz_table(spec, seed=seed)
    return float(table["g"]["x"] ** 2 + 2.0 * table["f"]["x"])


@dataclass(frozen=True)
class BoundCurves:
    """Tabulated theoretical envelopes along a solve's time nodes.

    dx_bound = 1/beta(t) dominates the x-seminorm; dx_cap is its horizon
    value (2/alpha) e^{lambda T}.  dp_bound_coupled = 2 sqrt(dx_norm(t)
    lambda_a) uses the measured x-seminorm and the largest eigenvalue of A.
    dp_bound_autonomous is shape-only (the constant in front is not explicit
    in the estimate) and is normalized to the measured value at t = 0.
    """

    times: np.ndarray
    dx_bound: np.ndarray
    dx_cap: float
    dp_bound_coupled: Optional[np.ndarray]
    dp_bound_autonomous: np.ndarray
    lambda_a: Optional[float]
    beta: BetaSchedule
    alpha: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.dx_bound)) or np.any(self.dx_bound <= 0):
            raise ModelError("dx_bound entries must be positive and finite")


def grad_norms(field: ValueField):
    """Per-time max finite-difference quotients over grid neighbors,
    x-block and p-block separately, restricted to the core p-nodes."""
    if max(len(a) for a in field.x_axes) < 2:
        raise ModelError("x-grid has a single node; quotients undefined")
    if max(c1 - c0 for c0, c1 in field.p_core) < 2:
        raise ModelError("core p-grid has a single node; quotients undefined")
    dx = np.empty(field.time_nodes.size)
    dp = np.empty(field.time_nodes.size)
    for j in range(field.time_nodes.size):
        dx[j], dp[j] = _grad_norms_slab(field.values[j], field.x_axes,
                                        field.p_axes, field.p_core)
    return dx, dp


def bound_curves(spec: ProblemSpec, alpha: float, A, T: float,
                 grad_history) -> BoundCurves:
    """Tabulate the envelopes on the time nodes of a solve's grad history."""
    if not (alpha > 0):
        raise ModelError("alpha must be positive")
    if not grad_history:
        raise ModelError("empty grad history")
    lam = lambda_beta_star(spec)
    beta = BetaSchedule(beta0=0.5 * alpha, lambda_beta=lam)
    times = np.array([g[0] for g in grad_history], dtype=float)
    dx_meas = np.array([g[1] for g in grad_history], dtype=float)
    dp_meas = np.array([g[2] for g in grad_history], dtype=float)
    dx_bound = 1.0 / beta(times)
    dx_cap = (2.0 / alpha) * float(np.exp(lam * T))
    lambda_a = None
    dp_coupled = None
    if A is not None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        lambda_a = float(np.linalg.eigvalsh(0.5 * (A + A.T)).max())
        dp_coupled = 2.0 * np.sqrt(np.maximum(dx_meas, 0.0) * lambda_a)
    m_run = np.maximum.accumulate(dx_meas)
    c0 = 0.5 * dp_meas[0]
    dp_auto = c0 * (1.0 + np.exp(times * m_run))
    return BoundCurves(times=times, dx_bound=dx_bound, dx_cap=dx_cap,
                       dp_bound_coupled=dp_coupled, dp_bound_autonomous=dp_auto,
                       lambda_a=lambda_a, beta=beta, alpha=float(alpha))


@dataclass(frozen=True)
class ZSample:
    """One evaluation of the comparison function Z with its three parts
    (inner product, A-quadratic, -beta |dU|^2); z_value is their sum."""

    where: tuple  # (t, x, y, p, q)
    z_value: float
    components: tuple

    def __post_init__(self):
        if abs(self.z_value - sum(self.components)) > 1e-12:
            raise ModelError("z_value does not match its components")


def _core_box(field: ValueField) -> Box:
    lo = [ax[c0] for ax, (c0, c1) in zip(field.p_axes, field.p_core)]
    hi = [ax[c1 - 1] for ax, (c0, c1) in zip(field.p_axes, field.p_core)]
    return Box(lo, hi)


def z_monitor(field: ValueField, A, beta: BetaSchedule,
              sampler: SamplerConfig, bins: int = 40):
    """Sample Z(t,x,y,p,q) = <dU, x-y> + <p-q, A(p-q)> - beta(t)|dU|^2.

    A = None or 0 selects the autonomous form, which pins q = p and drops
    the quadratic term.  Tuples mix structured grid pairs with uniform draws
    half and half; times are taken on the stored nodes, where the field is
    represented exactly.  Returns the worst sample and a histogram
    (bin_edges, counts).
    """
    autonomous = A is None or not np.any(np.asarray(A, dtype=float))
    if not autonomous:
        A = np.atleast_2d(np.asarray(A, dtype=float))
    xbox, _ = field.domain()
    xbox = sampler.x_box or xbox
    pbox = sampler.p_box or _core_box(field)
    n = sampler.n_samples
    gen = stream(sampler.seed, _Z_CHANNEL)
    nt = field.time_nodes.size

    # structured half: adjacent grid nodes along each axis, cycling through
    # time nodes; generic half: uniform tuples
    n_grid = n // 2
    xg = xbox.grid_axes(max(2, sampler.grid_nodes))
    pg = pbox.grid_axes(max(2, sampler.grid_nodes))
    x_pairs = [(i, a) for a in range(len(xg)) for i in range(len(xg[a]) - 1)]
    p_pairs = [(i, a) for a in range(len(pg)) for i in range(len(pg[a]) - 1)]

    def grid_tuple(k):
        ti = k % nt
        xi, xa = x_pairs[k % len(x_pairs)]
        x = np.array([g[len(g) // 2] for g in xg])
        y = x.copy()
        x[xa], y[xa] = xg[xa][xi], xg[xa][xi + 1]
        p = np.array([g[len(g) // 2] for g in pg])
        q = p.copy()
        if not autonomous:
            pi, pa = p_pairs[k % len(p_pairs)]
            p[pa], q[pa] = pg[pa][pi], pg[pa][pi + 1]
        return ti, x, y, p, q

    t_idx = np.empty(n, dtype=int)
    X = np.empty((n, len(xg)))
    Y = np.empty_like(X)
    P = np.empty((n, len(pg)))
    Q = np.empty_like(P)
    for k in range(n_grid):
        t_idx[k], X[k], Y[k], P[k], Q[k] = grid_tuple(k)
    n_rand = n - n_grid
    t_idx[n_grid:] = gen.integers(0, nt, n_rand)
    X[n_grid:] = xbox.sample(gen, n_rand)
    Y[n_grid:] = xbox.sample(gen, n_rand)
    P[n_grid:] = pbox.sample(gen, n_rand)
    Q[n_grid:] = pbox.sample(gen, n_rand) if not autonomous else P[n_grid:]

    c1 = np.empty(n)
    c2 = np.zeros(n)
    c3 = np.empty(n)
    for j in np.unique(t_idx):
        rows = np.nonzero(t_idx == j)[0]
        t = float(field.time_nodes[j])
        du = field(t, X[rows], P[rows]) - field(t, Y[rows], Q[rows])
        c1[rows] = np.einsum("ni,ni->n", du, X[rows] - Y[rows])
        if not autonomous:
            dpq = P[rows] - Q[rows]
            c2[rows] = np.einsum("ni,ij,nj->n", dpq, A, dpq)
        c3[rows] = -float(beta(t)) * np.einsum("ni,ni->n", du, du)
    z = c1 + c2 + c3
    i = int(np.argmin(z))
    worst = ZSample(
        where=(float(field.time_nodes[t_idx[i]]), X[i].copy(), Y[i].copy(),
               P[i].copy(), Q[i].copy()),
        z_value=float(c1[i]) + float(c2[i]) + float(c3[i]),
        components=(float(c1[i]), float(c2[i]), float(c3[i])))
    counts, edges = np.histogram(z, bins=bins)
    return worst, (edges, counts)


def uniqueness_probe(spec: ProblemSpec, grid: GridConfig, mc,
                     n_runs: int = 3, perturbation: float = 0.0,
                     ctrl: Optional[ContinuationConfig] = None,
                     force: bool = False) -> float:
    """Max sup-distance between re-solves that should agree: n_runs seeds,
    one grid refinement, and optionally one run with the time step scaled
    by (1 + perturbation).  Requires every run to converge."""
    ctrl = ctrl or ContinuationConfig()
    configs = [dataclasses.replace(mc, seed=mc.seed + k) for k in range(n_runs)]
    grids = [grid] * n_runs
    refined = dataclasses.replace(grid, nodes_x=2 * grid.nodes_x - 1,
                                  nodes_p=2 * grid.nodes_p - 1)
    configs.append(mc)
    grids.append(refined)
    if perturbation > 0.0:
        base_dt = mc.dt if mc.dt is not None else spec.horizon / 128.0
        configs.append(dataclasses.replace(mc, dt=base_dt * (1.0 + perturbation)))
        grids.append(grid)
    results = [picard_solve(spec, g, c, ctrl, force=force)
               for g, c in zip(grids, configs)]
    bad = [r.status for r in results if r.status != "Converged"]
    if bad:
        raise ModelError(f"probe runs did not all converge: statuses {bad}")

    xs = spec.omega.grid_axes(grid.nodes_x)
    ps = spec.p_box.grid_axes(grid.nodes_p)
    mesh = np.meshgrid(*xs, *ps, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    X, P = pts[:, :spec.d], pts[:, spec.d:]
    t_hi = min(float(r.field.time_nodes[-1]) for r in results)
    probes = np.linspace(0.0, t_hi, 9)
    worst = 0.0
    evals = [np.stack([r.field(t, X, P, clamp=True) for t in probes])
             for r in results]
    for a in range(len(evals)):
        for b in range(a + 1, len(evals)):
            worst = max(worst, float(np.abs(evals[a] - evals[b]).max()))
    return worst


def save_bound_curves(curves: BoundCurves, grad_history, path) -> str:
    """CSV rows (t, dx_norm, dp_norm, dx_bound, dp_bound); dp_bound is the
    coupled envelope when available, the shape-only autonomous curve else."""
    dp_bound = (curves.dp_bound_coupled if curves.dp_bound_coupled is not None
                else curves.dp_bound_autonomous)
    lines = ["t,dx_norm,dp_norm,dx_bound,dp_bound"]
    for (t, dx, dp), xb, pb in zip(grad_history, curves.dx_bound, dp_bound):
        lines.append(",".join(repr(float(v)) for v in (t, dx, dp, xb, pb)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


def save_z_histogram(histogram, path) -> str:
    """CSV rows (bin_lo, bin_hi, count)."""
    edges, counts = histogram
    lines = ["bin_lo,bin_hi,count"]
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        lines.append(f"{float(lo)!r},{float(hi)!r},{int(c)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)
