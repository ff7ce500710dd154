"""Problem data model: domain boxes, coefficient catalog, structural validation.

A problem couples a state variable x in a box Omega with a noise variable p in
a truncated box, through four coefficient fields F, G, b and the initial datum
U0.  Coefficients come from a small catalog (affine maps, polynomials of total
degree at most three, and named builtins) so that every field carries usable
Lipschitz information and evaluates vectorized over numpy batches.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .streams import stream

BLOCKS = ("x", "p", "u")

__all__ = [
    "Box",
    "CoefficientField",
    "AffineField",
    "PolynomialField",
    "BuiltinField",
    "affine",
    "polynomial",
    "builtin_field",
    "zero_field",
    "SamplerConfig",
    "ProblemSpec",
    "ValidationReport",
    "ModelError",
    "validate_problem",
    "lipschitz_seminorm",
    "lipschitz_table",
    "builtin_catalog",
    "default_buffer_width",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
]


class ModelError(ValueError):
    """Raised for malformed problem data."""


def _as_points(a, dim: int, name: str) -> np.ndarray:
    """Coerce input to a float array whose last axis has length dim."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise ModelError(f"{name}: scalar given for dimension {dim}")
        return arr.reshape(1)
    if arr.shape[-1] != dim:
        raise ModelError(f"{name}: last axis is {arr.shape[-1]}, expected {dim}")
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with strictly positive edge lengths."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ModelError("box bounds must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ModelError("box bounds must be finite")
        if not np.all(hi > lo):
            raise ModelError("box edge lengths must be strictly positive")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Draw n uniform points, shape (n, dim)."""
        return self.lo + gen.random((n, self.dim)) * self.widths

    def contains(self, pts, atol: float = 0.0) -> np.ndarray:
        pts = _as_points(pts, self.dim, "points")
        return np.all((pts >= self.lo - atol) & (pts <= self.hi + atol), axis=-1)

    def clamp(self, pts: np.ndarray) -> np.ndarray:
        # minimum/maximum instead of np.clip: same result, less call overhead
        return np.minimum(np.maximum(pts, self.lo), self.hi)

    def expand(self, width: float) -> "Box":
        return Box(self.lo - width, self.hi + width)

    def grid_axes(self, nodes: int) -> list[np.ndarray]:
        """Uniform per-axis node arrays with the given node count."""
        if nodes < 2:
            raise ModelError("grids need at least 2 nodes per axis")
        return [np.linspace(self.lo[i], self.hi[i], nodes) for i in range(self.dim)]


# ---------------------------------------------------------------------------
# Coefficient fields
# ---------------------------------------------------------------------------


class CoefficientField:
    """Common interface of catalog coefficients.

    Instances are immutable, evaluate vectorized via ``field(x, p, u)`` where
    each block is an array with matching leading shape (blocks the field does
    not read may be None), and report per-block Lipschitz information.
    """

    kind: str = "abstract"
    out_shape: tuple[int, ...] = ()
    reads: frozenset = frozenset()
    dims: dict  # block name -> input dimension

    @property
    def input_arity(self) -> tuple[str, ...]:
        return tuple(b for b in BLOCKS if b in self.reads)

    @property
    def out_dim(self) -> int:
        return int(np.prod(self.out_shape)) if self.out_shape else 1

    @property
    def is_zero(self) -> bool:
        return False

    def __call__(self, x=None, p=None, u=None) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_exact(self, block: str) -> Optional[float]:
        """Exact block Lipschitz constant when one is structurally known."""
        return None

    def lipschitz_bound(self, block: str, boxes: dict, seed: int = 0) -> float:
        """Reported Lipschitz bound of the block on the given domain boxes.

        Exact for affine fields, a dense-grid supremum of the Jacobian block
        norm for polynomials (tight for the shipped catalog), and a sampled
        finite-difference lower bound for builtins.
        """
        raise NotImplementedError

    # -- helpers shared by subclasses --

    def _gather(self, x, p, u) -> dict:
        vals = {"x": x, "p": p, "u": u}
        out = {}
        for b in self.reads:
            if vals[b] is None:
                raise ModelError(f"{self.kind} field reads {b} but got None")
            out[b] = _as_points(vals[b], self.dims[b], b)
        return out

    def _batch_shape(self, blocks: dict) -> tuple:
        shapes = [v.shape[:-1] for v in blocks.values()]
        return np.broadcast_shapes(*shapes) if shapes else ()


class AffineField(CoefficientField):
    """value = const + sum over read blocks of M_block z_block."""

    kind = "affine"

    def __init__(self, out_shape, dims: dict, const, mats: dict):
        self.out_shape = tuple(out_shape)
        self.dims = dict(dims)
        k = self.out_dim
        c = np.zeros(k) if const is None else np.asarray(const, dtype=float).reshape(k)
        self.const = c
        self.mats = {}
        reads = set()
        for b, mat in mats.items():
            if mat is None:
                continue
            m = np.asarray(mat, dtype=float).reshape(k, self.dims[b])
            if np.any(m != 0.0):
                self.mats[b] = m
                reads.add(b)
        self.reads = frozenset(reads)
        self.const.flags.writeable = False
        for m in self.mats.values():
            m.flags.writeable = False

    @property
    def is_zero(self) -> bool:
        return not self.mats and not np.any(self.const)

    def __call__(self, x=None, p=None, u=None) -> np.ndarray:
        blocks = self._gather(x, p, u)
        batch = self._batch_shape(blocks)
        out = np.broadcast_to(self.const, batch + (self.out_dim,)).copy()
        for b, mat in self.mats.items():
            out = out + blocks[b] @ mat.T
        return out.reshape(batch + self.out_shape)

    def linear_part(self, block: str) -> np.ndarray:
        return self.mats.get(block, np.zeros((self.out_dim, self.dims[block])))

    def lipschitz_exact(self, block: str) -> float:
        mat = self.mats.get(block)
        if mat is None:
            return 0.0
        return float(np.linalg.norm(mat, 2))

    def lipschitz_bound(self, block: str, boxes: dict, seed: int = 0) -> float:
        return self.lipschitz_exact(block)


class PolynomialField(CoefficientField):
    """Multivariate polynomial of total degree <= 3 over the read blocks.

    Terms are (exponents, coefficients) pairs; exponents index the
    concatenation (x_1..x_d, p_1..p_m, u_1..u_d).
    """

    kind = "polynomial"
    MAX_DEGREE = 3

    def __init__(self, out_shape, dims: dict, terms: Sequence[tuple]):
        self.out_shape = tuple(out_shape)
        self.dims = dict(dims)
        self.n_in = sum(self.dims[b] for b in BLOCKS)
        offs, start = {}, 0
        for b in BLOCKS:
            offs[b] = start
            start += self.dims[b]
        self._offsets = offs
        norm_terms = []
        reads = set()
        for exps, coefs in terms:
            e = tuple(int(v) for v in exps)
            if len(e) != self.n_in or any(v < 0 for v in e):
                raise ModelError("polynomial exponents malformed")
            if sum(e) > self.MAX_DEGREE:
                raise ModelError(f"polynomial total degree exceeds {self.MAX_DEGREE}")
            c = np.asarray(coefs, dtype=float).reshape(self.out_dim)
            if not np.any(c):
                continue
            c.flags.writeable = False
            norm_terms.append((e, c))
            for b in BLOCKS:
                lo, hi = offs[b], offs[b] + self.dims[b]
                if any(e[lo:hi]):
                    reads.add(b)
        self.terms = tuple(norm_terms)
        self.reads = frozenset(reads)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _concat(self, x, p, u, batch) -> np.ndarray:
        z = np.zeros(batch + (self.n_in,))
        vals = {"x": x, "p": p, "u": u}
        for b in self.reads:
            o = self._offsets[b]
            z[..., o : o + self.dims[b]] = _as_points(vals[b], self.dims[b], b)
        return z

    def __call__(self, x=None, p=None, u=None) -> np.ndarray:
        blocks = self._gather(x, p, u)
        batch = self._batch_shape(blocks)
        z = self._concat(x, p, u, batch)
        out = np.zeros(batch + (self.out_dim,))
        for exps, coefs in self.terms:
            mono = np.ones(batch)
            for j, e in enumerate(exps):
                if e:
                    mono = mono * z[..., j] ** e
            out = out + mono[..., None] * coefs
        return out.reshape(batch + self.out_shape)

    def _jacobian_terms(self, j: int) -> list[tuple]:
        """Terms of d(field)/dz_j, same exponent layout."""
        out = []
        for exps, coefs in self.terms:
            if exps[j] == 0:
                continue
            de = list(exps)
            de[j] -= 1
            out.append((tuple(de), exps[j] * coefs))
        return out

    def lipschitz_bound(self, block: str, boxes: dict, seed: int = 0) -> float:
        if block not in self.reads:
            return 0.0
        o, nb = self._offsets[block], self.dims[block]
        grid = _box_grid_concat(self, boxes, nodes=65)
        best = 0.0
        jac = np.zeros(grid.shape[:-1] + (self.out_dim, nb))
        for jj in range(nb):
            for exps, coefs in self._jacobian_terms(o + jj):
                mono = np.ones(grid.shape[:-1])
                for j, e in enumerate(exps):
                    if e:
                        mono = mono * grid[..., j] ** e
                jac[..., jj] += mono[..., None] * coefs
        if self.out_dim == 1 and nb == 1:
            best = float(np.max(np.abs(jac)))
        else:
            best = float(np.max(np.linalg.norm(jac.reshape(-1, self.out_dim, nb), 2, axis=(1, 2))))
        return best


class BuiltinField(CoefficientField):
    """Named closed-form coefficient with declared reads and output shape."""

    kind = "builtin"

    def __init__(self, name, params, fn, reads, out_shape, dims):
        self.name = name
        self.params = dict(params)
        self._fn = fn
        self.reads = frozenset(reads)
        self.out_shape = tuple(out_shape)
        self.dims = dict(dims)

    def __call__(self, x=None, p=None, u=None) -> np.ndarray:
        blocks = self._gather(x, p, u)
        batch = self._batch_shape(blocks)
        args = {b: np.broadcast_to(v, batch + (v.shape[-1],)) for b, v in blocks.items()}
        out = np.asarray(self._fn(args.get("x"), args.get("p"), args.get("u"), **self.params), dtype=float)
        want = batch + self.out_shape
        return np.broadcast_to(out, want) if out.shape != want else out

    def lipschitz_bound(self, block: str, boxes: dict, seed: int = 0) -> float:
        if block not in self.reads:
            return 0.0
        return _sampled_block_quotient(self, block, boxes, n_samples=4096, seed=seed)


def _box_grid_concat(field: CoefficientField, boxes: dict, nodes: int = 33) -> np.ndarray:
    """Tensor grid over the variables a field reads, in concat layout (N, n_in)."""
    axes = []
    for b in BLOCKS:
        box = boxes.get(b)
        for i in range(field.dims[b]):
            if b in field.reads:
                if box is None:
                    raise ModelError(f"no domain box available for block {b}")
                axes.append(np.linspace(box.lo[i], box.hi[i], nodes))
            else:
                axes.append(np.zeros(1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _sampled_block_quotient(field, block: str, boxes: dict, n_samples: int, seed: int,
                            grid_nodes: int = 129) -> float:
    """max |f(z) - f(z')| / |z - z'| over pairs differing only in one block."""
    box = boxes.get(block)
    if box is None:
        raise ModelError(f"no domain box available for block {block}")
    gen = stream(seed, 101)
    others = {}
    for b in field.reads:
        if b == block:
            continue
        ob = boxes.get(b)
        if ob is None:
            raise ModelError(f"no domain box available for block {b}")
        others[b] = ob.sample(gen, n_samples)
    za = box.sample(gen, n_samples)
    zb = box.sample(gen, n_samples)
    best = _quotient(field, block, za, zb, others)
    # adjacent grid pairs along each axis of the block, other blocks at center
    centers = {b: np.broadcast_to(boxes[b].center, (1, boxes[b].dim)) for b in field.reads if b != block}
    for i in range(box.dim):
        axis = np.linspace(box.lo[i], box.hi[i], grid_nodes)
        base = np.broadcast_to(box.center, (grid_nodes - 1, box.dim)).copy()
        nxt = base.copy()
        base[:, i] = axis[:-1]
        nxt[:, i] = axis[1:]
        best = max(best, _quotient(field, block, base, nxt, centers))
    return best


def _quotient(field, block, za, zb, others) -> float:
    args_a = {b: v for b, v in others.items()}
    args_b = {b: v for b, v in others.items()}
    args_a[block] = za
    args_b[block] = zb
    fa = field(**{k: args_a.get(k) for k in ("x", "p", "u")})
    fb = field(**{k: args_b.get(k) for k in ("x", "p", "u")})
    df = (fa - fb).reshape(za.shape[0], -1)
    dz = np.linalg.norm(za - zb, axis=-1)
    keep = dz > 1e-14
    if not np.any(keep):
        return 0.0
    q = np.linalg.norm(df[keep], axis=-1) / dz[keep]
    return float(np.max(q))


# -- constructors -----------------------------------------------------------


def _dims(d: int, m: int) -> dict:
    return {"x": d, "p": m, "u": d}


def affine(out_dim: int, d: int, m: int, const=None, x=None, p=None, u=None,
           out_shape=None) -> AffineField:
    shape = (out_dim,) if out_shape is None else tuple(out_shape)
    return AffineField(shape, _dims(d, m), const, {"x": x, "p": p, "u": u})


def polynomial(out_dim: int, d: int, m: int, terms, out_shape=None) -> PolynomialField:
    shape = (out_dim,) if out_shape is None else tuple(out_shape)
    return PolynomialField(shape, _dims(d, m), terms)


def zero_field(out_dim: int, d: int, m: int, out_shape=None) -> AffineField:
    return affine(out_dim, d, m, out_shape=out_shape)


# registry of named builtin coefficient formulas
_BUILTIN_COEFS: dict[str, dict] = {}


def _register_coef(name, fn, reads, out_of, params=()):
    _BUILTIN_COEFS[name] = {"fn": fn, "reads": frozenset(reads), "out_of": out_of,
                            "params": tuple(params)}


def builtin_field(name: str, d: int, m: int, **params) -> BuiltinField:
    try:
        entry = _BUILTIN_COEFS[name]
    except KeyError:
        raise ModelError(f"unknown builtin coefficient {name!r}") from None
    missing = [k for k in entry["params"] if k not in params]
    extra = [k for k in params if k not in entry["params"]]
    if missing or extra:
        raise ModelError(f"builtin {name!r} parameters: expected {entry['params']}, got {tuple(params)}")
    out_shape = entry["out_of"](d, m)
    return BuiltinField(name, params, entry["fn"], entry["reads"], out_shape, _dims(d, m))


def _geometric_drift(x, p, u, r0, r_amplitude):
    # (r0 + r_amplitude * sin(pi x) / (1 + p)) * p, with p clipped below 0 in
    # the denominator so the truncation buffer below p = 0 stays evaluable
    pp = np.maximum(p, 0.0)
    rate = r0 + r_amplitude * np.sin(np.pi * x[..., :1]) / (1.0 + pp)
    return rate * p


_register_coef("geometric_price_drift", _geometric_drift, ("x", "p"),
               lambda d, m: (m,), params=("r0", "r_amplitude"))


def _cbrt_u0(x, p, u):
    return np.cbrt(x)


_register_coef("cbrt", _cbrt_u0, ("x",), lambda d, m: (d,))


# ---------------------------------------------------------------------------
# Sampler configuration (shared by the Lipschitz estimator and the
# monotonicity checkers)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """How to sample points/pairs from the domain boxes."""

    n_samples: int = 4096
    seed: int = 0
    x_box: Optional[Box] = None
    p_box: Optional[Box] = None
    u_box: Optional[Box] = None
    include_grid_pairs: bool = True
    grid_nodes: int = 7

    def __post_init__(self):
        if self.n_samples < 1:
            raise ModelError("n_samples must be >= 1")

    def boxes(self, spec: Optional["ProblemSpec"] = None) -> dict:
        out = {"x": self.x_box, "p": self.p_box, "u": self.u_box}
        if spec is not None:
            out["x"] = out["x"] or spec.omega
            out["p"] = out["p"] or spec.p_box
            out["u"] = out["u"] or spec.u_box
        return out


# ---------------------------------------------------------------------------
# Problem specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem data for the master-equation laboratory."""

    d: int
    m: int
    omega: Box
    p_box: Box
    u_box: Box
    horizon: float
    sigma: float
    f_coef: CoefficientField
    g_coef: CoefficientField
    b_coef: CoefficientField
    u0: CoefficientField
    discount: float = 0.0
    volatility: Optional[CoefficientField] = None
    buffer_width: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ModelError("dimensions must be positive")
        if self.omega.dim != self.d or self.p_box.dim != self.m or self.u_box.dim != self.d:
            raise ModelError("box dimensions inconsistent with d, m")
        if not (self.horizon > 0):
            raise ModelError("horizon must be positive")
        if self.sigma < 0 or self.discount < 0:
            raise ModelError("sigma and discount must be nonnegative")
        for nm, f, shape in (("f_coef", self.f_coef, (self.d,)),
                             ("g_coef", self.g_coef, (self.d,)),
                             ("b_coef", self.b_coef, (self.m,)),
                             ("u0", self.u0, (self.d,))):
            if f.out_shape != shape:
                raise ModelError(f"{nm}: output shape {f.out_shape}, expected {shape}")
        if "u" in self.u0.reads:
            raise ModelError("u0 must not read u")
        if self.volatility is not None and self.volatility.out_shape != (self.m, self.m):
            raise ModelError("volatility must be m x m")
        if self.buffer_width is not None and self.buffer_width < 0:
            raise ModelError("buffer_width must be nonnegative")

    @property
    def coefficients(self) -> dict:
        out = {"f": self.f_coef, "g": self.g_coef, "b": self.b_coef, "u0": self.u0}
        if self.volatility is not None:
            out["volatility"] = self.volatility
        return out

    def boxes(self) -> dict:
        return {"x": self.omega, "p": self.p_box, "u": self.u_box}

    def autonomous(self) -> bool:
        """True when the noise drift ignores the state and the value."""
        return not ({"x", "u"} & self.b_coef.reads)


def lipschitz_table(spec: ProblemSpec, seed: int = 0) -> dict:
    """Per-coefficient, per-block Lipschitz bounds on the problem boxes."""
    boxes = spec.boxes()
    table = {}
    for nm, f in spec.coefficients.items():
        table[nm] = {b: f.lipschitz_bound(b, boxes, seed=seed) for b in BLOCKS}
    return table


def default_buffer_width(spec: ProblemSpec, horizon: Optional[float] = None,
                         n_face_samples: int = 256) -> float:
    """Truncation buffer around p_box absorbing path excursions.

    Noise contribution 4 sqrt(2 sigma T) plus T times the largest sampled
    outward drift of -b on the p_box faces (zero when the drift points
    inward everywhere, e.g. mean-reverting b).
    """
    if spec.buffer_width is not None:
        return float(spec.buffer_width)
    T = float(spec.horizon if horizon is None else horizon)
    if spec.volatility is not None:
        gen = stream(0, 7)
        xs = spec.omega.sample(gen, n_face_samples)
        ps = spec.p_box.sample(gen, n_face_samples)
        us = spec.u_box.sample(gen, n_face_samples)
        sig = spec.volatility(xs if "x" in spec.volatility.reads else None,
                              ps if "p" in spec.volatility.reads else None,
                              us if "u" in spec.volatility.reads else None)
        sig = np.broadcast_to(np.asarray(sig), (n_face_samples, spec.m, spec.m))
        rate = float(np.max(np.linalg.norm(sig, 2, axis=(1, 2)) ** 2))
        noise = 4.0 * math.sqrt(2.0 * rate * T)
    else:
        noise = 4.0 * math.sqrt(2.0 * spec.sigma * T)
    drift = 0.0
    b = spec.b_coef
    if not b.is_zero:
        gen = stream(0, 8)
        k = n_face_samples
        for i in range(spec.m):
            for side, normal in ((spec.p_box.lo[i], -1.0), (spec.p_box.hi[i], 1.0)):
                ps = spec.p_box.sample(gen, k)
                ps[:, i] = side
                xs = spec.omega.sample(gen, k)
                us = spec.u_box.sample(gen, k)
                vals = b(xs if "x" in b.reads else None,
                         ps if "p" in b.reads else None,
                         us if "u" in b.reads else None)
                outward = normal * (-np.asarray(vals)[..., i])
                drift = max(drift, float(np.max(outward)))
    return noise + drift * T


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    boundary_violations: list
    lipschitz_table: dict
    notes: str = ""


def validate_problem(spec: ProblemSpec, n_boundary_samples: int = 256,
                     seed: int = 0) -> ValidationReport:
    """Sample the faces of omega for outward flux of F and fill the
    Lipschitz table.

    A sample (x, p, u) with eta(x) . F(x, p, u) < -1e-12 is recorded as a
    boundary violation; eta is the outward unit normal of the face.
    """
    if not isinstance(spec, ProblemSpec):
        raise ModelError("validate_problem expects a ProblemSpec")
    if n_boundary_samples < 1:
        raise ModelError("n_boundary_samples must be >= 1")
    # smoke-evaluate every coefficient at the box centers
    xs = spec.omega.center[None, :]
    ps = spec.p_box.center[None, :]
    us = spec.u_box.center[None, :]
    for nm, f in spec.coefficients.items():
        try:
            val = f(xs if "x" in f.reads else None, ps if "p" in f.reads else None,
                    us if "u" in f.reads else None)
        except Exception as exc:  # pragma: no cover - defensive
            raise ModelError(f"coefficient {nm} failed to evaluate: {exc}") from exc
        if not np.all(np.isfinite(val)):
            raise ModelError(f"coefficient {nm} is non-finite at the domain center")

    violations = []
    f = spec.f_coef
    gen = stream(seed, 5)
    if not f.is_zero:
        for i in range(spec.d):
            for side_val, normal in ((spec.omega.lo[i], -1.0), (spec.omega.hi[i], 1.0)):
                xs = spec.omega.sample(gen, n_boundary_samples)
                xs[0] = spec.omega.center
                xs[:, i] = side_val
                ps = spec.p_box.sample(gen, n_boundary_samples)
                us = spec.u_box.sample(gen, n_boundary_samples)
                vals = f(xs if "x" in f.reads else None,
                         ps if "p" in f.reads else None,
                         us if "u" in f.reads else None)
                # constant fields come back without a batch axis
                vals = np.broadcast_to(np.asarray(vals, dtype=float),
                                       (n_boundary_samples, spec.d))
                flux = normal * vals[..., i]
                bad = np.nonzero(flux < -1e-12)[0]
                for j in bad:
                    violations.append((xs[j].copy(), ps[j].copy(), us[j].copy(), float(flux[j])))

    table = lipschitz_table(spec, seed=seed)
    notes = []
    if any(c.kind == "builtin" for c in spec.coefficients.values()):
        notes.append("builtin coefficient Lipschitz bounds are sampled lower bounds")
    if violations:
        notes.append(f"{len(violations)} boundary samples with inward-pointing flux")
    return ValidationReport(passed=not violations, boundary_violations=violations,
                            lipschitz_table=table, notes="; ".join(notes))


def lipschitz_seminorm(field: CoefficientField, block: str,
                       sampler: Optional[SamplerConfig] = None,
                       spec: Optional[ProblemSpec] = None) -> float:
    """sup |f(z) - f(z')| / |z - z'| over pairs varying only the given block.

    Exact (operator norm of the linear part) for affine fields; otherwise the
    max of finite-difference quotients on a regular grid and sampled random
    pairs, so the value is a lower bound approaching the seminorm with grid
    resolution.
    """
    if block not in BLOCKS:
        raise ModelError(f"unknown block {block!r}")
    exact = field.lipschitz_exact(block)
    if exact is not None:
        return exact
    if block not in field.reads:
        return 0.0
    sampler = sampler or SamplerConfig()
    boxes = sampler.boxes(spec)
    if boxes.get(block) is None:
        raise ModelError("no domain box available; pass a sampler with boxes or a spec")
    return _sampled_block_quotient(field, block, boxes,
                                   n_samples=sampler.n_samples, seed=sampler.seed)


# ---------------------------------------------------------------------------
# Builtin problem catalog
# ---------------------------------------------------------------------------


def builtin_catalog(name: str, *params: float) -> ProblemSpec:
    """Return the named fully-populated problem (all builtins have d = m = 1).

    Names and positional parameters:
      linear_toy(lam, alpha0, beta0)     F=u, G=x, b=lam*x, U0=alpha0*x+beta0*p
      autonomous_monotone                F=u, G=x, b=p, U0=x
      geometric_price(r0, r_amplitude)   growth drift on p_box in [0, inf)
      heat_only(sigma)                   F=G=b=0, U0=p^2
      invertible_transport               F=0, b=u, U0=x+p
    """
    d = m = 1
    builders = {
        "linear_toy": (_linear_toy, 3),
        "autonomous_monotone": (_autonomous_monotone, 0),
        "geometric_price": (_geometric_price, 2),
        "heat_only": (_heat_only, 1),
        "invertible_transport": (_invertible_transport, 0),
    }
    try:
        builder, n_par = builders[name]
    except KeyError:
        raise ModelError(f"unknown builtin problem {name!r}") from None
    if len(params) != n_par:
        raise ModelError(f"builtin {name!r} takes {n_par} parameters, got {len(params)}")
    return builder(*[float(v) for v in params])


def _linear_toy(lam: float, alpha0: float, beta0: float) -> ProblemSpec:
    d = m = 1
    # narrow noise box: face clamping of the state characteristics distorts
    # p-quotients near the corners by O(half_p^3), so keep half_p small
    # relative to the state box (the underlying example lives on the whole
    # line and its gradients do not depend on the box at all)
    half_p = 0.25
    return ProblemSpec(
        d=d, m=m,
        omega=Box([-1.0], [1.0]),
        p_box=Box([-half_p], [half_p]),
        u_box=Box([-(abs(alpha0) + abs(beta0) * half_p + 1.0)],
                  [abs(alpha0) + abs(beta0) * half_p + 1.0]),
        horizon=1.0, sigma=0.0,
        f_coef=affine(d, d, m, u=[[1.0]]),
        g_coef=affine(d, d, m, x=[[1.0]]),
        b_coef=affine(m, d, m, x=[[lam]]),
        u0=affine(d, d, m, x=[[alpha0]], p=[[beta0]]),
        name=f"linear_toy({lam:g},{alpha0:g},{beta0:g})",
    )


def _autonomous_monotone() -> ProblemSpec:
    d = m = 1
    return ProblemSpec(
        d=d, m=m,
        omega=Box([-1.0], [1.0]),
        p_box=Box([-1.0], [1.0]),
        u_box=Box([-2.0], [2.0]),
        horizon=1.0, sigma=0.0,
        f_coef=affine(d, d, m, u=[[1.0]]),
        g_coef=affine(d, d, m, x=[[1.0]]),
        b_coef=affine(m, d, m, p=[[1.0]]),
        u0=affine(d, d, m, x=[[1.0]]),
        name="autonomous_monotone",
    )


def _geometric_price(r0: float, r_amplitude: float) -> ProblemSpec:
    d = m = 1
    return ProblemSpec(
        d=d, m=m,
        omega=Box([0.0], [1.0]),
        p_box=Box([0.0], [2.0]),
        u_box=Box([-0.5], [1.5]),
        horizon=1.0, sigma=0.1,
        f_coef=affine(d, d, m, u=[[1.0]]),
        g_coef=affine(d, d, m, x=[[1.0]]),
        b_coef=builtin_field("geometric_price_drift", d, m, r0=r0, r_amplitude=r_amplitude),
        u0=affine(d, d, m, x=[[1.0]]),
        name=f"geometric_price({r0:g},{r_amplitude:g})",
    )


def _heat_only(sigma: float) -> ProblemSpec:
    d = m = 1
    n_in = d + m + d
    psq = [0] * n_in
    psq[d] = 2  # p^2
    return ProblemSpec(
        d=d, m=m,
        omega=Box([0.0], [1.0]),
        p_box=Box([-2.0], [2.0]),
        u_box=Box([-1.0], [6.0]),
        horizon=1.0, sigma=sigma,
        f_coef=zero_field(d, d, m),
        g_coef=zero_field(d, d, m),
        b_coef=zero_field(m, d, m),
        u0=polynomial(d, d, m, [(tuple(psq), [1.0])]),
        name=f"heat_only({sigma:g})",
    )


def _invertible_transport() -> ProblemSpec:
    d = m = 1
    return ProblemSpec(
        d=d, m=m,
        omega=Box([-1.0], [1.0]),
        p_box=Box([-1.0], [1.0]),
        u_box=Box([-2.5], [2.5]),
        horizon=1.0, sigma=0.0,
        f_coef=zero_field(d, d, m),
        g_coef=zero_field(d, d, m),
        b_coef=affine(m, d, m, u=[[1.0]]),
        u0=affine(d, d, m, x=[[1.0]], p=[[1.0]]),
        name="invertible_transport",
    )


# ---------------------------------------------------------------------------
# Serialization (hierarchical key-value problem files)
# ---------------------------------------------------------------------------


def _coef_to_dict(f: CoefficientField) -> dict:
    if isinstance(f, AffineField):
        out = {"kind": "affine", "const": f.const.tolist()}
        for b, mat in f.mats.items():
            out[b] = mat.tolist()
        return out
    if isinstance(f, PolynomialField):
        return {"kind": "polynomial",
                "terms": [{"exponents": list(e), "coef": c.tolist()} for e, c in f.terms]}
    if isinstance(f, BuiltinField):
        return {"kind": "builtin", "name": f.name,
                "params": {k: float(v) for k, v in f.params.items()}}
    raise ModelError(f"cannot serialize coefficient of kind {f.kind}")


def _coef_from_dict(d_: dict, out_dim: int, d: int, m: int, out_shape=None) -> CoefficientField:
    kind = d_.get("kind")
    if kind == "affine":
        return affine(out_dim, d, m, const=d_.get("const"), x=d_.get("x"),
                      p=d_.get("p"), u=d_.get("u"), out_shape=out_shape)
    if kind == "polynomial":
        terms = [(tuple(t["exponents"]), t["coef"]) for t in d_.get("terms", [])]
        return polynomial(out_dim, d, m, terms, out_shape=out_shape)
    if kind == "builtin":
        return builtin_field(d_["name"], d, m, **d_.get("params", {}))
    raise ModelError(f"unknown coefficient kind {kind!r}")


def problem_to_dict(spec: ProblemSpec) -> dict:
    out = {
        "problem": {
            "d": spec.d, "m": spec.m, "horizon": spec.horizon, "sigma": spec.sigma,
            "discount": spec.discount, "name": spec.name,
            "omega": {"lo": spec.omega.lo.tolist(), "hi": spec.omega.hi.tolist()},
            "p_box": {"lo": spec.p_box.lo.tolist(), "hi": spec.p_box.hi.tolist()},
            "u_box": {"lo": spec.u_box.lo.tolist(), "hi": spec.u_box.hi.tolist()},
        },
        "coefficients": {
            "f": _coef_to_dict(spec.f_coef),
            "g": _coef_to_dict(spec.g_coef),
            "b": _coef_to_dict(spec.b_coef),
            "u0": _coef_to_dict(spec.u0),
        },
    }
    if spec.buffer_width is not None:
        out["problem"]["buffer_width"] = spec.buffer_width
    if spec.volatility is not None:
        out["coefficients"]["volatility"] = _coef_to_dict(spec.volatility)
    return out


def problem_from_dict(data: dict) -> ProblemSpec:
    try:
        prob = data["problem"]
        if "builtin" in prob:
            b = prob["builtin"]
            spec = builtin_catalog(b["name"], *b.get("params", []))
            overrides = {k: prob[k] for k in ("horizon", "sigma", "discount") if k in prob}
            return dataclasses.replace(spec, **overrides) if overrides else spec
        coefs = data["coefficients"]
        d, m = int(prob["d"]), int(prob["m"])
        vol = coefs.get("volatility")
        return ProblemSpec(
            d=d, m=m,
            omega=Box(prob["omega"]["lo"], prob["omega"]["hi"]),
            p_box=Box(prob["p_box"]["lo"], prob["p_box"]["hi"]),
            u_box=Box(prob["u_box"]["lo"], prob["u_box"]["hi"]),
            horizon=float(prob["horizon"]),
            sigma=float(prob.get("sigma", 0.0)),
            discount=float(prob.get("discount", 0.0)),
            f_coef=_coef_from_dict(coefs["f"], d, d, m),
            g_coef=_coef_from_dict(coefs["g"], d, d, m),
            b_coef=_coef_from_dict(coefs["b"], m, d, m),
            u0=_coef_from_dict(coefs["u0"], d, d, m),
            volatility=None if vol is None else _coef_from_dict(vol, m * m, d, m, out_shape=(m, m)),
            buffer_width=prob.get("buffer_width"),
            name=str(prob.get("name", "")),
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed problem data: {exc}") from exc


def load_problem(path) -> ProblemSpec:
    """Read a problem spec from a TOML file (see docs/problem_format.md)."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python 3.10
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ModelError(f"cannot parse {path}: {exc}") from exc
    return problem_from_dict(data)
