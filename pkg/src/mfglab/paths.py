"""Characteristics simulation.

The state line X follows the deterministic flow dX = -B1 dt, the noise line p
the diffusion dp = -B2 dt + sqrt(2 sigma) dW (or sqrt(2) Sigma dW when a
volatility matrix is present).  All schemes are explicit Euler with clamping
to the domain boxes; clamp events are counted so the caller can judge whether
the invariance condition held.

Randomness comes from counter-keyed substreams per block of 8192 paths, so
serial and threaded runs of any worker count produce bitwise-identical
results.  Antithetic pairing puts (+W, -W) in adjacent path slots.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import Box, ModelError
from .streams import PATH_BLOCK, block_starts, stream

__all__ = [
    "MonteCarloConfig",
    "FrozenCoefficients",
    "PathBundle",
    "PayoffStats",
    "SimulationError",
    "simulate",
    "simulate_coupled",
    "feynman_kac_payoffs",
    "dump_paths",
]

# rows (nodes x paths) processed per stepping chunk; bounds peak memory only,
# results do not depend on it
_CHUNK_ROWS = 1 << 21


class SimulationError(RuntimeError):
    """Non-finite coefficient value along a path; carries an (s, x, p) witness."""

    def __init__(self, message, s=None, x=None, p=None):
        super().__init__(message)
        self.witness = (s, x, p)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sampling plan for one Feynman-Kac application."""

    n_paths: int
    seed: int
    dt: Optional[float] = None
    antithetic: bool = True
    threads: int = 1
    independent_drivers: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise ModelError("n_paths must be >= 1")
        if self.dt is not None and not (self.dt > 0):
            raise ModelError("dt must be positive")
        if self.threads < 1:
            raise ModelError("threads must be >= 1")


@dataclass
class FrozenCoefficients:
    """Drift/diffusion data with the value iterate already substituted.

    b1 and b2 are callables (t_rem, x, p) -> array; None means identically
    zero.  volatility, when present, replaces the scalar sqrt(2 sigma) noise
    with sqrt(2) Sigma(t_rem, x, p) dW.
    """

    x_box: Box
    p_box: Box
    sigma: float = 0.0
    b1: Optional[Callable] = None
    b2: Optional[Callable] = None
    volatility: Optional[Callable] = None

    @property
    def has_noise(self) -> bool:
        return self.volatility is not None or self.sigma > 0


@dataclass
class PathBundle:
    n_paths: int
    n_steps: int
    dt: float
    x_paths: np.ndarray  # (n_paths, n_steps + 1, d)
    p_paths: np.ndarray  # (n_paths, n_steps + 1, m)
    clamp_events: int
    seed: int
    paired: Optional[tuple] = None  # (y_paths, q_paths), same driver
    stream_policy: str = "counter-keyed substream per block of 8192 paths"

    @property
    def clamp_rate(self) -> float:
        denom = self.n_paths * max(self.n_steps, 1) * (2 if self.paired else 1)
        return self.clamp_events / denom


@dataclass
class PayoffStats:
    """Per-start Monte Carlo summary of one Feynman-Kac application."""

    mean: np.ndarray    # (n_starts, d)
    stderr: np.ndarray  # (n_starts, d)
    clamp_events: int
    n_steps: int
    dt: float
    n_units: int        # independent summands behind each mean (pairs if antithetic)
    n_rows: int = 1     # simulated (start, path) rows, the clamp-rate denominator

    @property
    def clamp_rate(self) -> float:
        return self.clamp_events / max(1, self.n_rows * self.n_steps)


def _resolve_steps(t: float, mc: MonteCarloConfig) -> tuple[int, float]:
    if t <= 0:
        return 0, 0.0
    hint = mc.dt if mc.dt is not None else t / 128.0
    n_steps = max(1, round(t / hint))
    return n_steps, t / n_steps


def _draw_block(gen: np.random.Generator, n_steps: int, n_cols: int, m: int,
                antithetic: bool) -> np.ndarray:
    if antithetic:
        w = gen.standard_normal((n_steps, n_cols // 2, m))
        out = np.empty((n_steps, n_cols, m))
        out[:, 0::2] = w
        out[:, 1::2] = -w
        return out
    return gen.standard_normal((n_steps, n_cols, m))


def _check_finite(vals: np.ndarray, what: str, s: float, x: np.ndarray, p: np.ndarray):
    # summing first turns the check into one reduction; values are far from
    # overflow scale, so a finite sum certifies every entry
    if np.isfinite(np.sum(vals)):
        return
    bad = ~np.isfinite(np.asarray(vals).reshape(vals.shape[:-1] + (-1,)).sum(axis=-1))
    if not bad.any():
        return
    idx = tuple(a[0] for a in np.nonzero(bad))
    raise SimulationError(
        f"non-finite {what} at path time s={s:.6g}, x={np.asarray(x)[idx]}, p={np.asarray(p)[idx]}",
        s=s, x=np.asarray(x)[idx].copy(), p=np.asarray(p)[idx].copy())


def _noise_increment(frozen: FrozenCoefficients, t_rem: float, x, p, dwk, dt: float):
    """Pre-scaled Brownian contribution for one step; dwk holds raw normals."""
    if frozen.volatility is not None:
        sig = np.asarray(frozen.volatility(t_rem, x, p))
        _check_finite(sig.reshape(sig.shape[:-2] + (-1,)), "volatility", t_rem, x, p)
        return math.sqrt(2.0 * dt) * np.einsum("...ij,...j->...i", sig, dwk)
    return math.sqrt(2.0 * frozen.sigma * dt) * dwk


def _walk_store(frozen, t, dt, n_steps, x, p, dw, X_out, P_out):
    """Advance one block in place, storing every step; returns clamp events."""
    events = 0
    X_out[:, 0] = x
    P_out[:, 0] = p
    for k in range(n_steps):
        s = k * dt
        t_rem = t - s
        if frozen.b1 is not None:
            b1v = np.asarray(frozen.b1(t_rem, x, p))
            _check_finite(b1v, "state drift", s, x, p)
            x_new = x - dt * b1v
        else:
            x_new = x.copy()
        if frozen.b2 is not None:
            b2v = np.asarray(frozen.b2(t_rem, x, p))
            _check_finite(b2v, "noise drift", s, x, p)
            p_new = p - dt * b2v
        else:
            p_new = p.copy()
        if dw is not None:
            p_new += _noise_increment(frozen, t_rem, x, p, dw[k], dt)
        xc = frozen.x_box.clamp(x_new)
        pc = frozen.p_box.clamp(p_new)
        moved = np.any(xc != x_new, axis=-1) | np.any(pc != p_new, axis=-1)
        events += int(np.count_nonzero(moved))
        x, p = xc, pc
        X_out[:, k + 1] = x
        P_out[:, k + 1] = p
    return events


def simulate(frozen: FrozenCoefficients, t: float, start, mc: MonteCarloConfig,
             stream_prefix: tuple = ()) -> PathBundle:
    """Simulate mc.n_paths characteristics from a single start (x0, p0).

    Full trajectories are stored; for the summed Feynman-Kac functional over
    many starts use feynman_kac_payoffs, which streams instead.
    """
    x0 = np.atleast_1d(np.asarray(start[0], dtype=float))
    p0 = np.atleast_1d(np.asarray(start[1], dtype=float))
    if not frozen.x_box.contains(x0[None, :]).all():
        raise ModelError("start x0 outside the state box")
    if not frozen.p_box.contains(p0[None, :]).all():
        raise ModelError("start p0 outside the buffered noise box")
    n_steps, dt = _resolve_steps(t, mc)
    n = mc.n_paths
    d, m = x0.size, p0.size
    if frozen.has_noise and mc.antithetic and n % 2:
        raise ModelError("antithetic sampling needs an even n_paths")
    X = np.empty((n, n_steps + 1, d))
    P = np.empty((n, n_steps + 1, m))
    events = 0
    for bi, (s0, s1) in enumerate(block_starts(n)):
        blen = s1 - s0
        dw = None
        if frozen.has_noise and n_steps:
            gen = stream(mc.seed, *stream_prefix, bi)
            dw = _draw_block(gen, n_steps, blen, m, mc.antithetic)
        x = np.broadcast_to(x0, (blen, d)).copy()
        p = np.broadcast_to(p0, (blen, m)).copy()
        events += _walk_store(frozen, t, dt, n_steps, x, p, dw, X[s0:s1], P[s0:s1])
    return PathBundle(n_paths=n, n_steps=n_steps, dt=dt, x_paths=X, p_paths=P,
                      clamp_events=events, seed=mc.seed)


def simulate_coupled(frozen: FrozenCoefficients, t: float, start_a, start_b,
                     mc: MonteCarloConfig, stream_prefix: tuple = ()) -> PathBundle:
    """Advance two characteristic systems in lockstep.

    By default both p-lines consume the same Brownian increments, so their
    difference is deterministic for state-independent noise; set
    mc.independent_drivers for the control variant with fresh increments on
    the second system.
    """
    x0 = np.atleast_1d(np.asarray(start_a[0], dtype=float))
    p0 = np.atleast_1d(np.asarray(start_a[1], dtype=float))
    y0 = np.atleast_1d(np.asarray(start_b[0], dtype=float))
    q0 = np.atleast_1d(np.asarray(start_b[1], dtype=float))
    for z, box, nm in ((x0, frozen.x_box, "x0"), (y0, frozen.x_box, "y0"),
                       (p0, frozen.p_box, "p0"), (q0, frozen.p_box, "q0")):
        if not box.contains(z[None, :]).all():
            raise ModelError(f"start {nm} outside its domain box")
    n_steps, dt = _resolve_steps(t, mc)
    n = mc.n_paths
    d, m = x0.size, p0.size
    if frozen.has_noise and mc.antithetic and n % 2:
        raise ModelError("antithetic sampling needs an even n_paths")
    X = np.empty((n, n_steps + 1, d))
    P = np.empty((n, n_steps + 1, m))
    Y = np.empty((n, n_steps + 1, d))
    Q = np.empty((n, n_steps + 1, m))
    events = 0
    for bi, (s0, s1) in enumerate(block_starts(n)):
        blen = s1 - s0
        dw = dw2 = None
        if frozen.has_noise and n_steps:
            gen = stream(mc.seed, *stream_prefix, bi)
            dw = _draw_block(gen, n_steps, blen, m, mc.antithetic)
            dw2 = _draw_block(gen, n_steps, blen, m, mc.antithetic) if mc.independent_drivers else dw
        x = np.broadcast_to(x0, (blen, d)).copy()
        p = np.broadcast_to(p0, (blen, m)).copy()
        events += _walk_store(frozen, t, dt, n_steps, x, p, dw, X[s0:s1], P[s0:s1])
        y = np.broadcast_to(y0, (blen, d)).copy()
        q = np.broadcast_to(q0, (blen, m)).copy()
        events += _walk_store(frozen, t, dt, n_steps, y, q, dw2, Y[s0:s1], Q[s0:s1])
    return PathBundle(n_paths=n, n_steps=n_steps, dt=dt, x_paths=X, p_paths=P,
                      clamp_events=events, seed=mc.seed, paired=(Y, Q))


# ---------------------------------------------------------------------------
# Streaming Feynman-Kac accumulation over a batch of starts
# ---------------------------------------------------------------------------


def feynman_kac_payoffs(frozen: FrozenCoefficients, a: Optional[Callable],
                        u0_eval: Callable, t: float, x_starts, p_starts,
                        mc: MonteCarloConfig, discount: float = 0.0,
                        stream_prefix: tuple = ()) -> PayoffStats:
    """Monte Carlo mean of the discounted source integral plus terminal datum.

    For every start (x_starts[i], p_starts[i]) the estimator averages

        sum_k exp(-discount * s_k) a(t - s_k, X_k, p_k) dt
        + exp(-discount * t) u0_eval(X_n, p_n)

    over paths (left-endpoint rectangle rule).  Every start shares the same
    driving noise (common random numbers across grid nodes), which keeps
    finite differences of the output field quiet.  a=None means no source.
    """
    x_starts = np.atleast_2d(np.asarray(x_starts, dtype=float))
    p_starts = np.atleast_2d(np.asarray(p_starts, dtype=float))
    if x_starts.shape[0] != p_starts.shape[0]:
        raise ModelError("x_starts and p_starts must align")
    N, d = x_starts.shape
    m = p_starts.shape[1]
    n_steps, dt = _resolve_steps(t, mc)

    if not frozen.has_noise or n_steps == 0:
        payoff = np.zeros((N, d))
        events = _walk_accumulate(frozen, a, u0_eval, t, dt, n_steps,
                                  x_starts.copy(), p_starts.copy(), None,
                                  discount, payoff)
        return PayoffStats(mean=payoff, stderr=np.zeros_like(payoff),
                           clamp_events=events, n_steps=n_steps, dt=dt,
                           n_units=1, n_rows=N)

    if mc.antithetic and mc.n_paths % 2:
        raise ModelError("antithetic sampling needs an even n_paths")
    blocks = block_starts(mc.n_paths)
    nb = len(blocks)
    part_sum = np.zeros((nb, N, d))
    part_sq = np.zeros((nb, N, d))
    part_events = np.zeros(nb, dtype=np.int64)
    fast = (frozen.b1 is None and frozen.b2 is None and a is None
            and frozen.volatility is None)

    def run_block(bi: int):
        blen = blocks[bi][1] - blocks[bi][0]
        gen = stream(mc.seed, *stream_prefix, bi)
        dw = _draw_block(gen, n_steps, blen, m, mc.antithetic)
        if fast:
            payoff, ev = _terminal_only_block(frozen, u0_eval, t, dt, x_starts,
                                              p_starts, dw, discount)
        else:
            payoff = np.zeros((N, blen, d))
            ev = 0
            chunk = max(1, _CHUNK_ROWS // blen)
            for c0 in range(0, N, chunk):
                c1 = min(c0 + chunk, N)
                xs = np.broadcast_to(x_starts[c0:c1, None, :], (c1 - c0, blen, d)).copy()
                ps = np.broadcast_to(p_starts[c0:c1, None, :], (c1 - c0, blen, m)).copy()
                ev += _walk_accumulate(frozen, a, u0_eval, t, dt, n_steps, xs, ps,
                                       dw[:, None, :, :], discount, payoff[c0:c1])
        if mc.antithetic:
            units = 0.5 * (payoff[:, 0::2] + payoff[:, 1::2])
        else:
            units = payoff
        part_sum[bi] = units.sum(axis=1)
        part_sq[bi] = (units ** 2).sum(axis=1)
        part_events[bi] = ev

    if mc.threads > 1 and nb > 1:
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            list(pool.map(run_block, range(nb)))
    else:
        for bi in range(nb):
            run_block(bi)

    n_units = mc.n_paths // 2 if mc.antithetic else mc.n_paths
    total = part_sum.sum(axis=0)
    mean = total / n_units
    if n_units > 1:
        var = (part_sq.sum(axis=0) - n_units * mean ** 2) / (n_units - 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / n_units)
    else:
        stderr = np.zeros_like(mean)
    if not np.all(np.isfinite(mean)):
        bad = np.argwhere(~np.isfinite(mean))[0]
        raise SimulationError(
            f"non-finite accumulation at start index {bad[0]}",
            s=t, x=x_starts[bad[0]], p=p_starts[bad[0]])
    return PayoffStats(mean=mean, stderr=stderr,
                       clamp_events=int(part_events.sum()),
                       n_steps=n_steps, dt=dt, n_units=n_units,
                       n_rows=N * mc.n_paths)


def _walk_accumulate(frozen, a, u0_eval, t, dt, n_steps, x, p, dw, discount, payoff):
    """Step a batch in place, adding the rectangle-rule integral and terminal
    datum into payoff (same leading shape as x); returns clamp events."""
    events = 0
    for k in range(n_steps):
        s = k * dt
        t_rem = t - s
        if a is not None:
            av = np.asarray(a(t_rem, x, p))
            _check_finite(av, "source", s, x, p)
            w = math.exp(-discount * s) if discount else 1.0
            payoff += (w * dt) * av
        if frozen.b1 is not None:
            b1v = np.asarray(frozen.b1(t_rem, x, p))
            _check_finite(b1v, "state drift", s, x, p)
            x_new = x - dt * b1v
        else:
            x_new = x
        if frozen.b2 is not None:
            b2v = np.asarray(frozen.b2(t_rem, x, p))
            _check_finite(b2v, "noise drift", s, x, p)
            p_new = p - dt * b2v
        else:
            p_new = p.copy() if dw is not None else p
        if dw is not None:
            p_new += _noise_increment(frozen, t_rem, x, p, dw[k], dt)
        xc = frozen.x_box.clamp(x_new)
        pc = frozen.p_box.clamp(p_new)
        moved = np.any(xc != x_new, axis=-1) | np.any(pc != p_new, axis=-1)
        events += int(np.count_nonzero(moved))
        x, p = xc, pc
    term = np.asarray(u0_eval(x, p))
    _check_finite(term, "terminal datum", t, x, p)
    w = math.exp(-discount * t) if discount else 1.0
    payoff += w * term
    return events


def _terminal_only_block(frozen, u0_eval, t, dt, x_starts, p_starts, dw, discount):
    """Zero drifts, scalar noise, no source: p_T by cumulative sums, with the
    rare excursions beyond the buffered box re-stepped exactly."""
    N, d = x_starts.shape
    m = p_starts.shape[1]
    blen = dw.shape[1]
    dws = math.sqrt(2.0 * frozen.sigma * dt) * dw
    csum = np.cumsum(dws, axis=0)
    final = csum[-1]
    cmax = np.maximum(csum.max(axis=0), 0.0)
    cmin = np.minimum(csum.min(axis=0), 0.0)
    lo, hi = frozen.p_box.lo, frozen.p_box.hi
    pT = p_starts[:, None, :] + final[None, :, :]
    bad = np.any((p_starts[:, None, :] + cmax[None, :, :] > hi)
                 | (p_starts[:, None, :] + cmin[None, :, :] < lo), axis=-1)
    events = 0
    if np.any(bad):
        bi, bj = np.nonzero(bad)
        pb = p_starts[bi].copy()
        cols = dws[:, bj, :]
        for k in range(len(dws)):
            p_new = pb + cols[k]
            pc = np.clip(p_new, lo, hi)
            events += int(np.count_nonzero(np.any(pc != p_new, axis=-1)))
            pb = pc
        pT[bi, bj] = pb
    xs = np.broadcast_to(x_starts[:, None, :], (N, blen, d))
    payoff = np.asarray(u0_eval(xs, pT), dtype=float)
    if discount:
        payoff = math.exp(-discount * t) * payoff
    return payoff, events


def dump_paths(bundle: PathBundle, path) -> None:
    """Write trajectories to CSV: path id, step, s, X coords, p coords."""
    d = bundle.x_paths.shape[2]
    m = bundle.p_paths.shape[2]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path", "step", "s"] + [f"x{i}" for i in range(d)]
                    + [f"p{i}" for i in range(m)])
        for k in range(bundle.n_paths):
            for j in range(bundle.n_steps + 1):
                wr.writerow([k, j, repr(j * bundle.dt)]
                            + [repr(float(v)) for v in bundle.x_paths[k, j]]
                            + [repr(float(v)) for v in bundle.p_paths[k, j]])

