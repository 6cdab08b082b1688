"""Points, projective points, charts, numeric differentiation and sampling.

Every map in the package acts on the last axis of a float array, so a batch
of points is an ``(N, d)`` array and a single point is a ``(d,)`` array.
Complex coordinates are stored as interleaved real pairs ``(re, im)``.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainExit, EmptyOverlap, InverseMismatch, ZeroVector

Array = np.ndarray
Map = Callable[[Array], Array]

TAU_RT = 1e-9
TAU_ID = 1e-9
TAU_COC = 1e-7
LADDER = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


class FieldTag(enum.Enum):
    REAL = "R"
    COMPLEX = "C"

    @property
    def width(self) -> int:
        """Real slots per field coordinate."""
        return 1 if self is FieldTag.REAL else 2


def as_point(coords) -> Array:
    """Validate and return a float coordinate array (RealPoint)."""
    x = np.asarray(coords, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def to_complex(x: Array) -> Array:
    """Interleaved real pairs on the last axis to complex values."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z: Array) -> Array:
    """Inverse of :func:`to_complex`."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def field_values(x: Array, field: FieldTag) -> Array:
    return to_complex(x) if field is FieldTag.COMPLEX else np.asarray(x, dtype=float)


def field_reals(z: Array, field: FieldTag) -> Array:
    return to_real(z) if field is FieldTag.COMPLEX else np.asarray(z, dtype=float)


def i_matrix(n: int) -> Array:
    """Real matrix of multiplication by i on n interleaved complex coordinates."""
    j = np.zeros((2 * n, 2 * n))
    for k in range(n):
        j[2 * k + 1, 2 * k] = 1.0
        j[2 * k, 2 * k + 1] = -1.0
    return j


def complex_matrix_to_real(a: Array) -> Array:
    """Realification of complex matrices on the last two axes."""
    a = np.asarray(a, dtype=complex)
    n, k = a.shape[-2:]
    out = np.zeros(a.shape[:-2] + (2 * n, 2 * k))
    out[..., 0::2, 0::2] = a.real
    out[..., 0::2, 1::2] = -a.imag
    out[..., 1::2, 0::2] = a.imag
    out[..., 1::2, 1::2] = a.real
    return out


def commutator_norm(h: Array) -> Array:
    """Spectral norm of hJ - Jh for real matrices on the last two axes."""
    j = i_matrix(h.shape[-1] // 2)
    return np.linalg.norm(h @ j - j @ h, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------- projective


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """A point of FP^{k-1} given by homogeneous coordinates (real slots)."""

    homogeneous: Array
    field: FieldTag = FieldTag.REAL

    def __post_init__(self):
        h = as_point(self.homogeneous)
        object.__setattr__(self, "homogeneous", h)
        if np.max(np.abs(h), initial=0.0) == 0.0:
            raise ZeroVector("projective point with all coordinates zero")

    @property
    def values(self) -> Array:
        return field_values(self.homogeneous, self.field)

    @property
    def size(self) -> int:
        return self.homogeneous.shape[-1] // self.field.width

    def normalized(self) -> "ProjPoint":
        return proj_normalize(self)

    def distance(self, other: "ProjPoint") -> float:
        return float(proj_distance(self.values, other.values))

    def __repr__(self) -> str:
        return f"ProjPoint({np.array2string(self.homogeneous, precision=6)}, {self.field.value})"


def normalize_values(z: Array) -> Array:
    """Scale homogeneous field values so the largest one becomes 1.

    Ties are broken towards the lowest index (relative slack 1e-12).
    Works on the last axis of real or complex arrays.
    """
    z = np.asarray(z)
    mag = np.abs(z)
    top = mag.max(axis=-1, keepdims=True)
    if np.any(top == 0.0):
        raise ZeroVector("cannot normalize the zero vector")
    k = np.argmax(mag >= top * (1 - 1e-12), axis=-1)
    pivot = np.take_along_axis(z, k[..., None], axis=-1)
    return z / pivot


def proj_normalize(p: ProjPoint) -> ProjPoint:
    """Canonical representative: largest coordinate rescaled to (positive real) 1."""
    return ProjPoint(field_reals(normalize_values(p.values), p.field), p.field)


def proj_distance(a: Array, b: Array) -> Array:
    """Sine of the angle between the lines spanned by a and b (last axis).

    Computed as the norm of the rejection of the unit vector of b from the
    line of a, which keeps full precision for nearly equal lines.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    ua = a / np.linalg.norm(a, axis=-1, keepdims=True)
    ub = b / np.linalg.norm(b, axis=-1, keepdims=True)
    t = np.sum(np.conj(ua) * ub, axis=-1, keepdims=True)
    return np.linalg.norm(ub - t * ua, axis=-1)


# ---------------------------------------------------------------- charts


@dataclass(frozen=True)
class Box:
    """Axis-aligned open box."""

    lo: Array
    hi: Array

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    @classmethod
    def cube(cls, dim: int, radius: float, center=None) -> "Box":
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(c - radius, c + radius)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def empty(self) -> bool:
        return bool(np.any(self.hi <= self.lo))

    def contains(self, x: Array) -> Array:
        x = np.asarray(x)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def intersect(self, other: "Box") -> "Box":
        return Box(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def shrink(self, frac: float) -> "Box":
        c = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo) * frac
        return Box(c - half, c + half)

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))


@dataclass(frozen=True)
class ChartFn:
    """A smooth map with explicit inverse on a box-shaped domain.

    ``guard`` optionally narrows the box (used for overlaps and cut-up
    charts whose true domains are images of boxes).
    """

    dim_in: int
    dim_out: int
    forward: Map
    inverse: Map
    domain: Box
    guard: Optional[Callable[[Array], Array]] = None

    def __call__(self, x: Array) -> Array:
        return self.forward(np.asarray(x, dtype=float))

    def inv(self, y: Array) -> Array:
        return self.inverse(np.asarray(y, dtype=float))

    def contains(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        inside = self.domain.contains(x)
        if self.guard is not None:
            inside = inside & self.guard(x)
        return inside

    def roundtrip_residual(self, x: Array) -> float:
        x = np.atleast_2d(x)
        return float(np.max(np.abs(self.inv(self(x)) - x), initial=0.0))


def identity_chart(dim: int, radius: float = 1.0) -> ChartFn:
    ident = lambda x: np.array(x, dtype=float)
    return ChartFn(dim, dim, ident, ident, Box.cube(dim, radius))


def linear_chart(a: Array, radius: float = 1.0) -> ChartFn:
    a = np.asarray(a, dtype=float)
    a_inv = np.linalg.inv(a)
    n = a.shape[0]
    return ChartFn(n, n, lambda x: x @ a.T, lambda y: y @ a_inv.T, Box.cube(n, radius))


@dataclass(frozen=True)
class YChart:
    """A chart into F^c x R^m whose first c field coordinates cut out Y."""

    chart: ChartFn
    c: int
    m: int
    field: FieldTag = FieldTag.REAL

    def __post_init__(self):
        if self.chart.dim_out != self.n_normal + self.m:
            raise ValueError("chart output dimension does not match c, m and field")

    @property
    def n_normal(self) -> int:
        """Real slots occupied by the normal coordinates."""
        return self.c * self.field.width

    @property
    def dim(self) -> int:
        return self.n_normal + self.m

    def __call__(self, x: Array) -> Array:
        return self.chart(x)

    def inv(self, z: Array) -> Array:
        return self.chart.inv(z)

    def contains(self, x: Array) -> Array:
        return self.chart.contains(x)

    def split(self, z: Array) -> tuple[Array, Array]:
        z = np.asarray(z)
        return z[..., : self.n_normal], z[..., self.n_normal :]


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic sampling recipe plus tolerances."""

    seed: int = 0
    n_interior: int = 400
    n_near: int = 360
    n_on: int = 120
    ladder: tuple[float, ...] = LADDER
    tol_rt: float = TAU_RT
    tol_id: float = TAU_ID
    tol_coc: float = TAU_COC

    @property
    def total(self) -> int:
        return self.n_interior + self.n_near + self.n_on

    def rng(self, stream: str) -> np.random.Generator:
        """Independent generator for a named stream; stable across runs."""
        return np.random.default_rng([self.seed, zlib.crc32(stream.encode())])

    def scaled(self, factor: float) -> "SamplePlan":
        f = lambda n: max(1, int(round(n * factor)))
        return SamplePlan(
            self.seed, f(self.n_interior), f(self.n_near), f(self.n_on),
            self.ladder, self.tol_rt, self.tol_id, self.tol_coc,
        )


@dataclass(frozen=True)
class SampleSet:
    """Chart coordinates of sampled points with their provenance."""

    coords: Array
    kind: Array  # "interior", "near", "on"
    grade: Array  # distance to Y for near points, nan otherwise

    def __len__(self) -> int:
        return self.coords.shape[0]

    def select(self, kind: str) -> Array:
        return self.coords[self.kind == kind]


def _rejection(box: Box, accept: Callable[[Array], Array], rng, n: int) -> Array:
    found: list[Array] = []
    count = 0
    for _ in range(60):
        if count >= n:
            break
        cand = box.sample(rng, max(4 * n, 64))
        cand = cand[accept(cand)]
        found.append(cand)
        count += cand.shape[0]
    if not found:
        return np.zeros((0, box.dim))
    return np.concatenate(found)[:n]


def sample_adapted(
    chart: YChart,
    plan: SamplePlan,
    stream: str,
    region: Optional[Callable[[Array], Array]] = None,
    n_interior: Optional[int] = None,
    n_near: Optional[int] = None,
    n_on: Optional[int] = None,
) -> SampleSet:
    """Sample chart coordinates of points of the chart domain.

    ``region`` is an extra predicate on ambient points (e.g. membership in a
    second chart, giving overlap samples). Near-Y points are produced by
    placing the normal coordinates at each distance of the ladder.
    """
    n_i = plan.n_interior if n_interior is None else n_interior
    n_n = plan.n_near if n_near is None else n_near
    n_o = plan.n_on if n_on is None else n_on
    rng = plan.rng(stream)

    def accept(x):
        ok = chart.contains(x)
        if region is not None:
            ok = ok & region(x)
        return ok

    pool = _rejection(chart.chart.domain, accept, rng, max(n_i, n_n, n_o, 1))
    if pool.shape[0] == 0:
        raise EmptyOverlap(f"no sample point found for stream {stream!r}")
    z_pool = chart(pool)
    r, s = chart.split(z_pool)
    coords = [z_pool[:n_i]]
    kinds = [np.full(min(n_i, len(z_pool)), "interior")]
    grades = [np.full(min(n_i, len(z_pool)), np.nan)]

    def keep(z):
        return z[accept(chart.inv(z))]

    if n_o > 0:
        z_on = keep(np.concatenate([np.zeros_like(r), s], axis=-1))[:n_o]
        coords.append(z_on)
        kinds.append(np.full(len(z_on), "on"))
        grades.append(np.full(len(z_on), np.nan))
    if n_n > 0:
        per = -(-n_n // len(plan.ladder))
        norm = np.linalg.norm(r, axis=-1, keepdims=True)
        rnd = rng.normal(size=r.shape)
        rnd /= np.linalg.norm(rnd, axis=-1, keepdims=True)
        unit = np.where(norm > 1e-12, r / np.where(norm > 0, norm, 1.0), rnd)
        for t in plan.ladder:
            z_t = keep(np.concatenate([t * unit, s], axis=-1))[:per]
            coords.append(z_t)
            kinds.append(np.full(len(z_t), "near"))
            grades.append(np.full(len(z_t), t))
    return SampleSet(np.concatenate(coords), np.concatenate(kinds), np.concatenate(grades))


# ---------------------------------------------------------------- operations


def overlap_map(a: YChart, b: YChart, plan: Optional[SamplePlan] = None) -> ChartFn:
    """The overlap map a o b^{-1}, acting on b-coordinates of U_a n U_b."""
    plan = plan or SamplePlan()
    inter = a.chart.domain.intersect(b.chart.domain)
    if inter.empty:
        raise EmptyOverlap("chart domains are disjoint")
    rng = plan.rng("overlap")
    both = lambda x: a.contains(x) & b.contains(x)
    xs = _rejection(inter, both, rng, 100)
    if xs.shape[0] == 0:
        raise EmptyOverlap("no sampled common point")
    rt = max(a.chart.roundtrip_residual(xs), b.chart.roundtrip_residual(xs))
    if rt >= plan.tol_rt:
        raise InverseMismatch(f"chart roundtrip residual {rt:.3e}")
    zb = b(xs)
    lo, hi = zb.min(axis=0), zb.max(axis=0)
    pad = 0.5 * (hi - lo) + 1.0
    dom = Box(lo - pad, hi + pad)

    guard = lambda z: both(b.inv(z))
    return ChartFn(
        b.dim, a.dim,
        lambda z: a(b.inv(z)),
        lambda w: b(a.inv(w)),
        dom,
        guard,
    )


_STENCILS = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    6: (
        np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]),
        np.array([-1 / 60, 3 / 20, -3 / 4, 3 / 4, -3 / 20, 1 / 60]),
    ),
}


def jacobian(fun: Map, x: Array, h: float = 1e-5, order: int = 2, cols=None) -> Array:
    """Batched central-difference Jacobian.

    ``x`` has shape (..., n); the result has shape (..., n_out, len(cols)).
    ``order`` 2 is the plain two-point stencil, 6 the seven-point one.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = range(n) if cols is None else cols
    offsets, weights = _STENCILS[order]
    out = []
    for j in cols:
        e = np.zeros(n)
        e[j] = h
        pts = x[..., None, :] + offsets[:, None] * e
        vals = fun(pts)
        out.append(np.tensordot(weights, np.moveaxis(vals, -2, 0), axes=1) / h)
    return np.stack(out, axis=-1)


def numeric_jacobian(f: ChartFn | Map, x: Array, h: float = 1e-5) -> Array:
    """Central-difference Jacobian (f(x+he_j) - f(x-he_j)) / 2h at one point."""
    x = as_point(x)
    if isinstance(f, ChartFn):
        n = x.shape[-1]
        stencil = np.concatenate([x + h * np.eye(n), x - h * np.eye(n)])
        if not np.all(f.contains(stencil)):
            raise DomainExit("stencil point leaves the chart domain")
        fun = f.forward
    else:
        fun = f
    return jacobian(fun, x, h, order=2)


def newton_inverse(fun: Map, target: Array, guess: Array, tol: float = 1e-14, max_iter: int = 50) -> Array:
    """Solve fun(x) = target by batched Newton steps from ``guess``.

    Uses the six-point Jacobian; rows that fail to converge keep their last
    iterate, so callers should check the roundtrip residual.
    """
    x = np.array(guess, dtype=float, copy=True)
    target = np.asarray(target, dtype=float)
    for _ in range(max_iter):
        res = fun(x) - target
        if np.max(np.abs(res), initial=0.0) < tol:
            break
        jac = jacobian(fun, x, 1e-6, order=6)
        x = x - np.linalg.solve(jac, res[..., None])[..., 0]
    return x
