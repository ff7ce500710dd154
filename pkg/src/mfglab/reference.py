"""Independent oracles used to ground the solver tests.

The scalar Riccati pair behind the linear ansatz is integrated by a
hand-rolled RK4 so that nothing here shares code with the Monte Carlo
machinery; a certificate reports parameter sets whose blow-up is
guaranteed in closed form.  Closed-form fields for the pure-diffusion
and linear problems, plus the inverse-flow composition identity on the
value-driven transport example, complete the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .model import ModelError, builtin_catalog
from .solver import ValueField

__all__ = [
    "ToyTrajectory",
    "toy_ode_solve",
    "toy_blowup_certificate",
    "certificate_line",
    "analytic_solution",
    "inverse_identity_check",
    "save_trajectory",
]

DIVERGENCE_THRESHOLD = 1e6


# ---------------------------------------------------------------------------
# Riccati pair alpha' = 1 - alpha^2 - lam beta, beta' = -alpha beta
# ---------------------------------------------------------------------------


@dataclass
class ToyTrajectory:
    """RK4 trace of (alpha, beta); a finite blowup_time means |alpha|
    crossed the divergence threshold before the requested horizon."""

    times: np.ndarray
    alpha_values: np.ndarray
    beta_values: np.ndarray
    blowup_time: Optional[float]
    blown_up: bool

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.alpha_values = np.asarray(self.alpha_values, dtype=float)
        self.beta_values = np.asarray(self.beta_values, dtype=float)
        if not (self.times.size == self.alpha_values.size == self.beta_values.size):
            raise ModelError("trajectory arrays must share a length")
        if self.blown_up != (self.blowup_time is not None):
            raise ModelError("blown_up inconsistent with blowup_time")
        if not (np.isfinite(self.alpha_values).all() and np.isfinite(self.beta_values).all()):
            raise ModelError("stored trajectory values must be finite")
        if self.blowup_time is not None and self.times.size:
            if self.times[-1] > self.blowup_time:
                raise ModelError("nodes recorded past the blow-up time")


def _rhs(lam: float, a: float, b: float) -> tuple[float, float]:
    return 1.0 - a * a - lam * b, -a * b


def _rk4_step(lam: float, a: float, b: float, h: float) -> tuple[float, float]:
    k1a, k1b = _rhs(lam, a, b)
    k2a, k2b = _rhs(lam, a + 0.5 * h * k1a, b + 0.5 * h * k1b)
    k3a, k3b = _rhs(lam, a + 0.5 * h * k2a, b + 0.5 * h * k2b)
    k4a, k4b = _rhs(lam, a + h * k3a, b + h * k3b)
    return (a + h * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0,
            b + h * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0)


def _escaped(a: float, b: float, threshold: float) -> bool:
    return (not math.isfinite(a)) or (not math.isfinite(b)) or abs(a) > threshold


def toy_ode_solve(lam: float, alpha0: float, beta0: float, T: float, dt: float,
                  threshold: float = DIVERGENCE_THRESHOLD) -> ToyTrajectory:
    """Integrate the pair to T with fixed-step RK4.

    Blow-up is a result, not an error: when |alpha| crosses the threshold
    the step is bisected to locate the crossing and the trajectory keeps
    only the nodes before it.  The threshold default is far enough into the
    super-exponential escape that its exact value moves the reported time
    by less than 1e-5.
    """
    if not dt > 0.0:
        raise ModelError("dt must be positive")
    if T < 0.0:
        raise ModelError("T must be nonnegative")
    lam, a, b = float(lam), float(alpha0), float(beta0)
    if _escaped(a, b, threshold):
        return ToyTrajectory(np.empty(0), np.empty(0), np.empty(0), 0.0, True)
    times, avals, bvals = [0.0], [a], [b]
    t = 0.0
    while t < T - 1e-12:
        h = min(dt, T - t)
        a2, b2 = _rk4_step(lam, a, b, h)
        if _escaped(a2, b2, threshold):
            lo, hi = 0.0, h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                am, bm = _rk4_step(lam, a, b, mid)
                if _escaped(am, bm, threshold):
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-16 * max(1.0, t):
                    break
            return ToyTrajectory(times, avals, bvals, t + 0.5 * (lo + hi), True)
        t += h
        a, b = a2, b2
        times.append(t)
        avals.append(a)
        bvals.append(b)
    return ToyTrajectory(times, avals, bvals, None, False)


def save_trajectory(traj: ToyTrajectory, path) -> str:
    lines = ["t,alpha,beta"]
    for t, a, b in zip(traj.times, traj.alpha_values, traj.beta_values):
        lines.append(f"{float(t)!r},{float(a)!r},{float(b)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# Closed-form blow-up certificate
# ---------------------------------------------------------------------------


def _certificate_value(lam: float, alpha0: float, beta0: float) -> float:
    return 1.0 - lam * beta0 * math.exp(-alpha0 * (alpha0 + 1.0))


def toy_blowup_certificate(lam: float, alpha0: float, beta0: float) -> str:
    """'GuaranteedBlowup' when either closed-form branch applies, else
    'NoCertificate'.  The second verdict is not a safety proof."""
    if lam * beta0 >= 1.0 and alpha0 < 0.0:
        return "GuaranteedBlowup"
    if alpha0 > 0.0 and _certificate_value(lam, alpha0, beta0) <= -1.0:
        return "GuaranteedBlowup"
    return "NoCertificate"


def certificate_line(lam: float, alpha0: float, beta0: float) -> str:
    """One-line verdict carrying the evaluated inequality."""
    value = _certificate_value(lam, alpha0, beta0)
    if lam * beta0 >= 1.0 and alpha0 < 0.0:
        return (f"GuaranteedBlowup: lam*beta0 = {lam * beta0:.6g} >= 1 "
                f"with alpha0 = {alpha0:.6g} < 0")
    if alpha0 > 0.0 and value <= -1.0:
        return (f"GuaranteedBlowup: 1 - lam*beta0*exp(-alpha0*(alpha0+1)) "
                f"= {value:.6g} <= -1")
    return (f"NoCertificate: 1 - lam*beta0*exp(-alpha0*(alpha0+1)) "
            f"= {value:.6g} > -1 and (lam*beta0, alpha0) = "
            f"({lam * beta0:.6g}, {alpha0:.6g}) misses the decreasing branch")


# ---------------------------------------------------------------------------
# Closed-form solutions
# ---------------------------------------------------------------------------

_ODE_DT = 1e-3  # RK4 global error ~ dt^4 stays far below every tolerance used


def _as_batch(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z[None, None]
    elif z.ndim == 1:
        z = z[:, None]
    return z


def analytic_solution(name: str, params, t: float, x, p) -> np.ndarray:
    """Closed-form value fields for the calibration problems.

    heat_quadratic(sigma): |p|^2 + 2 sigma t m, the second moment of the
    driven noise coordinate.  linear_toy(lam, alpha0, beta0): alpha(t) x +
    beta(t) p with the pair integrated on demand; queries past blow-up are
    an error.  x and p may be scalars or (n, dim) batches; the result has
    one trailing component.
    """
    x, p = _as_batch(x), _as_batch(p)
    t = float(t)
    if t < 0.0:
        raise ModelError("t must be nonnegative")
    if name == "heat_quadratic":
        (sigma,) = params
        m = p.shape[-1]
        val = np.sum(p * p, axis=-1, keepdims=True) + 2.0 * sigma * t * m
        return np.broadcast_to(val, np.broadcast_shapes(val.shape, x.shape[:-1] + (1,))).copy()
    if name == "linear_toy":
        lam, alpha0, beta0 = params
        if t == 0.0:
            a, b = float(alpha0), float(beta0)
        else:
            traj = toy_ode_solve(lam, alpha0, beta0, t, _ODE_DT)
            if traj.blown_up:
                raise ModelError(
                    f"linear ansatz undefined at t={t}: blow-up at {traj.blowup_time}")
            a, b = float(traj.alpha_values[-1]), float(traj.beta_values[-1])
        return a * x + b * p
    raise ModelError(f"unknown analytic solution {name!r}")


# ---------------------------------------------------------------------------
# Inverse-flow composition identity
# ---------------------------------------------------------------------------


def inverse_identity_check(field: ValueField, t: float,
                           tolerance: float = 1e-12) -> float:
    """Worst deviation of V(t, U(t,x,p), p) from x over the field's grid.

    The inverse V is rebuilt independently of the solver: per (y, p) a
    scalar root solve inverts the initial datum x + q at the shifted noise
    coordinate q = p - t y, which is where the value-driven drift b = u
    carries p when the value along the flow is frozen at y.  The field must
    be strictly increasing in x (positive minimum directional difference)
    for the composition to be meaningful; tolerance bounds the root solve.
    """
    spec = builtin_catalog("invertible_transport")
    if field.n_x_axes != 1 or len(field.p_axes) != 1 or field.d != 1:
        raise ModelError("the inverse identity check is one-dimensional")
    tn = field.time_nodes
    t = float(t)
    if not (tn[0] - 1e-12 <= t <= tn[-1] + 1e-12):
        raise ModelError(f"t={t} outside the stored range [{tn[0]}, {tn[-1]}]")
    xs, ps = field.x_axes[0], field.p_axes[0]
    X, P = np.meshgrid(xs, ps, indexing="ij")
    pts_x = X.reshape(-1, 1)
    pts_p = P.reshape(-1, 1)
    u_grid = field(t, pts_x, pts_p).reshape(len(xs), len(ps))
    if np.diff(u_grid, axis=0).min() <= 0.0:
        raise ModelError("field is not strictly monotone in x; inverse identity undefined")

    u0 = spec.u0

    def datum(s: float, q: float) -> float:
        return float(u0(x=np.array([[s]]), p=np.array([[q]]))[0, 0])

    lo0, hi0 = float(spec.omega.lo[0]), float(spec.omega.hi[0])
    worst = 0.0
    for i, xv in enumerate(xs):
        for j, pv in enumerate(ps):
            y = float(u_grid[i, j])
            q = pv - t * y
            lo, hi = lo0, hi0
            width = hi - lo
            for _ in range(60):
                if (datum(lo, q) - y) * (datum(hi, q) - y) <= 0.0:
                    break
                lo -= width
                hi += width
            else:
                raise ModelError("could not bracket the initial-datum inverse")
            root = brentq(lambda s: datum(s, q) - y, lo, hi, xtol=tolerance)
            worst = max(worst, abs(root - xv))
    return worst
