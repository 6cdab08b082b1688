"""Global blowups from tubular neighborhood identifications.

The normal bundle is presented in a global trivialization: a point of W is
a pair v = (r, y) with r the normal coordinates (real slots) and y the
coordinates of its base point on Y. Psi sends W into the ambient space X.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import checks
from .chartcore import (
    TAU_COC,
    TAU_ID,
    Array,
    Box,
    ChartFn,
    FieldTag,
    Map,
    ProjPoint,
    SamplePlan,
    YChart,
    field_values,
    i_matrix,
    jacobian,
    proj_distance,
    sample_adapted,
)
from .errors import ContractViolation, FNonPositive, GluingMiss, MembershipViolation
from .localblow import hadamard_h
from .tautological import line_residual

_JAC_STEP = 1e-5


@dataclass(frozen=True)
class TubularNbhd:
    """A tubular neighborhood identification (W, Psi) for Y in X.

    ``psi`` acts on (r, y) with domain W. ``embed`` maps Y-coordinates into
    X, ``embed_inv`` recovers them, and ``normal_frame(y)`` gives ambient
    vectors whose classes modulo TY are the standard normal frame.
    """

    c: int
    m: int
    psi: ChartFn
    field: FieldTag = FieldTag.REAL
    embed: Optional[Map] = None
    embed_inv: Optional[Map] = None
    normal_frame: Optional[Callable[[Array], Array]] = None
    base_charts: Sequence[YChart] = ()

    @property
    def n_normal(self) -> int:
        return self.c * self.field.width

    @property
    def total_dim(self) -> int:
        return self.psi.dim_out

    @property
    def W(self) -> Box:
        return self.psi.domain

    @property
    def y_box(self) -> Box:
        n = self.n_normal
        return Box(self.W.lo[n:], self.W.hi[n:])

    def embed_y(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        if self.embed is not None:
            return self.embed(y)
        return np.concatenate([np.zeros(y.shape[:-1] + (self.n_normal,)), y], axis=-1)

    def y_of(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if self.embed_inv is not None:
            return self.embed_inv(x)
        return x[..., self.n_normal :]

    def frame(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        if self.normal_frame is not None:
            return self.normal_frame(y)
        eye = np.eye(self.total_dim)[:, : self.n_normal]
        return np.broadcast_to(eye, y.shape[:-1] + eye.shape).copy()

    def model_chart(self) -> YChart:
        """W as a chart of normal coordinates for sampling."""
        ident = lambda z: np.array(z, dtype=float)
        return YChart(ChartFn(self.psi.dim_in, self.psi.dim_in, ident, ident, self.W), self.c, self.m, self.field)

    def __call__(self, v: Array) -> Array:
        return self.psi(v)

    def inv(self, x: Array) -> Array:
        return self.psi.inv(x)


def _tangent_complement(t: TubularNbhd, y: Array) -> Array:
    """Projector onto the orthogonal complement of d(embed) at y."""
    eye = np.eye(t.total_dim)
    if t.m == 0:
        return np.broadcast_to(eye, y.shape[:-1] + eye.shape).copy()
    d = jacobian(t.embed_y, y, _JAC_STEP, order=6)
    q, _ = np.linalg.qr(d)
    return eye - q @ np.swapaxes(q, -1, -2)


def verify_tni(t: TubularNbhd, plan: SamplePlan) -> checks.Report:
    """Psi restricted to Y is the inclusion; its normal derivative is the identity mod TY."""
    ss = sample_adapted(t.model_chart(), plan, "tni", n_interior=0, n_near=0, n_on=plan.n_on)
    v0 = ss.coords
    n = t.n_normal
    y = v0[:, n:]
    on_y = float(np.max(np.abs(t(v0) - t.embed_y(y)), initial=0.0))
    h = _JAC_STEP
    dpsi = jacobian(t.psi.forward, v0, h, order=2, cols=range(n))
    proj = _tangent_complement(t, y)
    dev = np.einsum("...ij,...jk->...ik", proj, dpsi - t.frame(y))
    jac = float(np.max(np.abs(dev), initial=0.0))
    return checks.Report(
        "tni",
        (
            checks.Check("identity_on_Y", on_y, plan.tol_id, len(v0)),
            checks.Check("normal_derivative", jac, 10 * h * h + plan.tol_id, len(v0)),
        ),
    )


# ---------------------------------------------------------------- global blowup


@dataclass(frozen=True, eq=False)
class GlobalPoint:
    """(line, v) with v in W on the line, or an X-side point x (line None)."""

    v: Optional[Array] = None
    line: Optional[ProjPoint] = None
    x: Optional[Array] = None


@dataclass(frozen=True)
class GlobalBlowup:
    t: TubularNbhd

    def point(self, line, v) -> GlobalPoint:
        v = np.asarray(v, dtype=float)
        lp = line if isinstance(line, ProjPoint) else ProjPoint(line, self.t.field)
        r = field_values(v[: self.t.n_normal], self.t.field)
        if float(line_residual(lp.values, r)) >= TAU_ID * max(1.0, float(np.linalg.norm(r))):
            raise MembershipViolation("normal vector is off the line")
        if not self.t.psi.contains(v):
            raise MembershipViolation("vector outside W")
        return GlobalPoint(v=v, line=lp)

    def x_point(self, x) -> GlobalPoint:
        return GlobalPoint(x=np.asarray(x, dtype=float))

    def blowdown(self, p: GlobalPoint) -> Array:
        if p.line is None:
            return p.x
        return self.t(p.v)

    def lift(self, x: Array) -> GlobalPoint:
        """The W-side representative of an ambient point off Y (gluing relation)."""
        v = self.t.inv(x)
        r = v[: self.t.n_normal]
        if np.max(np.abs(r)) <= TAU_ID:
            raise MembershipViolation("point lies on Y")
        return GlobalPoint(v=v, line=ProjPoint(r, self.t.field))


def global_blowup_build(t: TubularNbhd, plan: Optional[SamplePlan] = None) -> GlobalBlowup:
    rep = verify_tni(t, plan or SamplePlan())
    if not rep.passed:
        bad = [c.name for c in rep.checks if not c.passed]
        raise ContractViolation(f"tubular neighborhood contract fails: {', '.join(bad)}")
    return GlobalBlowup(t)


def verify_global_blowup(space: GlobalBlowup, plan: SamplePlan, n: int = 1000) -> checks.Report:
    """Gluing consistency, off-Y injectivity and the exceptional fiber."""
    t = space.t
    nn = t.n_normal
    ss = sample_adapted(t.model_chart(), plan, "global", n_interior=n, n_near=0, n_on=0)
    v = ss.coords[np.max(np.abs(ss.coords[:, :nn]), axis=-1) > 1e-9]
    x = t(v)
    back = t.inv(x)
    lines = field_values(v[:, :nn], t.field)
    glue = np.maximum(
        proj_distance(field_values(back[:, :nn], t.field), lines),
        np.max(np.abs(back - v), axis=-1),
    )
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    off_y = np.max(np.abs(t.embed_y(t.y_of(x)) - x), axis=-1)
    # exceptional fiber: every line over y blows down to y
    rng = plan.rng("global-fiber")
    y = t.y_box.shrink(0.5).sample(rng, 50)
    v0 = np.concatenate([np.zeros((50, nn)), y], axis=-1)
    fib = float(np.max(np.abs(t(v0) - t.embed_y(y)), initial=0.0))
    # preimages of a compact part of the image stay inside W
    inner = t.model_chart().chart.domain.shrink(0.5)
    back_in = t.psi.contains(t.inv(t(inner.sample(rng, 200))))
    return checks.Report(
        "global_blowup",
        (
            checks.Check("gluing", float(glue.max(initial=0.0)), plan.tol_id, len(v)),
            checks.Check("pairwise_distinct", float(np.sqrt(d2.min())), 0.0, len(v), mode="min"),
            checks.Check("off_Y_stays_off", float(off_y.min(initial=1.0)), 0.0, len(v), mode="min"),
            checks.Check("exceptional_to_Y", fib, plan.tol_id, 50),
            checks.flag("bounded_preimage", bool(back_in.all()), 200),
        ),
    )


# ---------------------------------------------------------------- equivalence


def equiv_map(t1: TubularNbhd, t2: TubularNbhd) -> ChartFn:
    """G = Psi_1^{-1} o Psi_2 on W_2 coordinates, guarded to land in W_1."""
    guard = lambda v: t1.psi.contains(t1.inv(t2(v)))
    return ChartFn(
        t2.psi.dim_in, t1.psi.dim_in,
        lambda v: t1.inv(t2(v)),
        lambda u: t2.inv(t1(u)),
        t2.W,
        guard,
    )


def equiv_h(t1: TubularNbhd, t2: TubularNbhd, tol: float = TAU_ID):
    """Hadamard h for G along rays in the normal directions."""
    return hadamard_h(equiv_map(t1, t2), t1.c, t1.m, t1.field, tol)


def _clinear_candidate(h: Array, v: Array, c: int) -> Array:
    """The C-linear matrix agreeing with h on v: h_C + (h_A v) v^*/|v|^2.

    h_C and h_A are the C-linear and antilinear parts of the real matrix h
    acting on interleaved pairs; the correction only sees h_A applied to v,
    so no cancellation occurs near Y.
    """
    j = i_matrix(c)
    hc = 0.5 * (h - j @ h @ j)
    ha = h - hc
    av = np.einsum("...ij,...j->...i", ha, v)
    vc = field_values(v, FieldTag.COMPLEX)
    ac = field_values(av, FieldTag.COMPLEX)
    outer = ac[..., :, None] * np.conj(vc)[..., None, :] / np.sum(np.abs(vc) ** 2, axis=-1)[..., None, None]
    # complex c x c to real 2c x 2c
    re, im = outer.real, outer.imag
    out = np.zeros(outer.shape[:-2] + (2 * c, 2 * c))
    out[..., 0::2, 0::2] = re
    out[..., 0::2, 1::2] = -im
    out[..., 1::2, 0::2] = im
    out[..., 1::2, 1::2] = re
    return hc + out


def tni_equiv_check(t1: TubularNbhd, t2: TubularNbhd, plan: SamplePlan) -> checks.Report:
    """Numerical test for an F-linear h with Psi_1^{-1}(Psi_2(v)) = h(v) v.

    (a) the Hadamard h satisfies the identity at sampled points, (b) h is
    the identity on Y with the ray ladder decaying towards it, and for
    F = C (c) the C-linear candidate built from h extends across Y: it tends
    to the identity along rays and its ray derivative is additive in the
    direction, as the derivative of a C^1 map must be.
    """
    n = t1.n_normal
    g = equiv_map(t1, t2)
    h = hadamard_h(g, t1.c, t1.m, t1.field, plan.tol_id)
    ss = sample_adapted(t2.model_chart(), plan, "tni-equiv", region=lambda v: g.contains(v))
    z = ss.coords
    hz = h(z)
    ident = np.max(np.abs(g(z)[:, :n] - np.einsum("...ij,...j->...i", hz, z[:, :n])), axis=-1)
    on = ss.kind == "on"
    eye = np.eye(n)
    on_y = float(np.max(np.abs(hz[on] - eye), initial=0.0))
    y_fixed = float(np.max(np.abs(g(z[on]) - z[on]), initial=0.0))
    ladder = {}
    for t in plan.ladder:
        sel = ss.grade == t
        if sel.any():
            ladder[f"{t:g}"] = float(np.max(np.abs(hz[sel] - eye)))
    decays = list(ladder.values())
    monotone = all(b <= a * 1.01 + plan.tol_id for a, b in zip(decays, decays[1:]))
    out = [
        checks.Check("identity", float(ident.max()), plan.tol_id, len(z)),
        checks.Check("h_on_Y", max(on_y, y_fixed), plan.tol_coc, int(on.sum()), detail={"ladder": ladder}),
        checks.flag("h_ladder_decays", monotone, len(decays)),
    ]
    if t1.field is FieldTag.COMPLEX:
        out.extend(_complex_clause(t1, h, z[on], plan))
    return checks.Report("tni_equiv", tuple(out))


def _complex_clause(t: TubularNbhd, h, base: Array, plan: SamplePlan) -> list[checks.Check]:
    n = t.n_normal
    rng = plan.rng("tni-equiv-c")
    base = base[: max(10, min(len(base), 40))]
    k = len(base)
    u1 = rng.normal(size=(k, n))
    u2 = rng.normal(size=(k, n))
    u1 /= np.linalg.norm(u1, axis=-1, keepdims=True)
    u2 /= np.linalg.norm(u2, axis=-1, keepdims=True)
    dirs = [u1, u2, u1 + u2]
    grades = [1e-1, 1e-2, 1e-3]
    eye = np.eye(n)

    def cand(u, s):
        z = np.concatenate([s * u, base[:, n:]], axis=-1)
        return _clinear_candidate(h(z), z[:, :n], t.c)

    c0 = max(float(np.max(np.abs(cand(u1, 1e-4) - eye))), float(np.max(np.abs(cand(u2, 1e-4) - eye))))
    ds = []
    for u in dirs:
        q = [(cand(u, s) - eye) / s for s in grades]
        # one extrapolation step removes the O(s) term of the difference quotient
        ds.append((10 * q[2] - q[1]) / 9)
    defect = np.max(np.abs(ds[2] - ds[0] - ds[1]), axis=(-2, -1))
    scale = np.maximum(1.0, np.max(np.abs(ds[2]), axis=(-2, -1)))
    return [
        checks.Check("clinear_extension_c0", c0, 1e-3, k),
        checks.Check("clinear_extension_c1", float(np.max(defect / scale)), 1e-3, k),
    ]


# ---------------------------------------------------------------- augmented


@dataclass(frozen=True)
class InnerProduct:
    """An inner product on N^{c1} = 0 x R^{c2} given by its Gram matrix at y."""

    gram: Callable[[Array], Array]

    def at(self, y: Array) -> Array:
        return np.asarray(self.gram(np.asarray(y, dtype=float)), dtype=float)

    def sq(self, w: Array, y: Array) -> Array:
        return np.einsum("...i,...ij,...j->...", w, self.at(y), w)

    def dot(self, a: Array, b: Array, y: Array) -> Array:
        return np.einsum("...i,...ij,...j->...", a, self.at(y), b)


def standard_inner_product(c2: int) -> InnerProduct:
    eye = np.eye(c2)
    return InnerProduct(lambda y: np.broadcast_to(eye, np.asarray(y).shape[:-1] + (c2, c2)).copy())


def verify_inner_product(ip: InnerProduct, t: TubularNbhd, plan: SamplePlan, n: int = 100) -> checks.Report:
    rng = plan.rng("ip")
    y = rng.uniform(t.y_box.lo, t.y_box.hi, size=(n, t.m))
    g = ip.at(y)
    sym = float(np.max(np.abs(g - np.swapaxes(g, -1, -2))))
    ev = float(np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2))).min())
    return checks.Report(
        "inner_product",
        (checks.Check("symmetric", sym, TAU_ID, n), checks.Check("positive", ev, 0.0, n, mode="min")),
    )


@dataclass(frozen=True, eq=False)
class AugGlobalPoint:
    """A point of the augmented blowup in the open-sets description.

    sector 0: X-side point ``x``. sector 1: a line and vector v in W.
    sector 2: a line [v, c] of N' + tau^1 (size c1+1, trivial slot last),
    a fiber vector (v', c') on it, w in N^{c1} and the base y.
    """

    sector: int
    x: Optional[Array] = None
    line: Optional[Array] = None
    vec: Optional[Array] = None
    fiber: Optional[Array] = None
    w: Optional[Array] = None
    y: Optional[Array] = None


def aug_x_point(x) -> AugGlobalPoint:
    return AugGlobalPoint(0, x=np.asarray(x, dtype=float))


def aug_sector1_point(line, vec, c1: int) -> AugGlobalPoint:
    line = np.asarray(line, dtype=float)
    vec = np.asarray(vec, dtype=float)
    c = line.shape[0]
    if float(line_residual(line, vec[:c])) >= TAU_ID * max(1.0, float(np.linalg.norm(vec[:c]))):
        raise MembershipViolation("vector is off the line")
    if np.max(np.abs(line[:c1])) <= TAU_ID * np.max(np.abs(line)):
        raise MembershipViolation("line lies inside N^{c1}")
    return AugGlobalPoint(1, line=line, vec=vec)


def aug_sector2_point(line, fiber, w, y) -> AugGlobalPoint:
    line = np.asarray(line, dtype=float)
    fiber = np.asarray(fiber, dtype=float)
    if np.max(np.abs(fiber), initial=0.0) > 0 and float(line_residual(line, fiber)) >= TAU_ID * max(1.0, float(np.linalg.norm(fiber))):
        raise MembershipViolation("fiber vector is off the line")
    return AugGlobalPoint(2, line=line, fiber=fiber, w=np.asarray(w, dtype=float), y=np.asarray(y, dtype=float))


def sector2_normal(fiber: Array, w: Array, y: Array, ip: InnerProduct) -> Array:
    """Batched c |w|^2 v + c w in N' + N^{c1} from fiber (v, c)."""
    v, cc = fiber[..., :-1], fiber[..., -1:]
    sq = ip.sq(w, y)[..., None]
    return np.concatenate([cc * sq * v, cc * w], axis=-1)


def aug_global_blowdown(p: AugGlobalPoint, t: TubularNbhd, ip: InnerProduct) -> Array:
    if p.sector == 0:
        return p.x
    if p.sector == 1:
        if not t.psi.contains(p.vec):
            raise MembershipViolation("vector outside W")
        return t(p.vec)
    u = np.concatenate([sector2_normal(p.fiber, p.w, p.y, ip), p.y], axis=-1)
    if not t.psi.contains(u):
        raise MembershipViolation("c<w,w>v + cw lies outside W")
    return t(u)


def sector1_partner(p: AugGlobalPoint, ip: InnerProduct) -> AugGlobalPoint:
    """The sector-1 point glued to a sector-2 point: ([<w,w>v + w], c<w,w>v + cw)."""
    v = p.fiber[:-1]
    if np.max(np.abs(v), initial=0.0) == 0.0 or np.max(np.abs(p.w), initial=0.0) == 0.0:
        raise GluingMiss("point is outside the gluing locus")
    line = np.concatenate([ip.sq(p.w, p.y) * v, p.w])
    vec = np.concatenate([sector2_normal(p.fiber, p.w, p.y, ip), p.y])
    return AugGlobalPoint(1, line=line, vec=vec)


def _sample_sector2(t: TubularNbhd, ip: InnerProduct, c1: int, plan: SamplePlan, n: int, stream: str, scale: float = 0.5):
    """Random sector-2 data (line, fiber, w, y) whose blowdown lies in W."""
    rng = plan.rng(stream)
    c2 = t.c - c1
    out = []
    got = 0
    for _ in range(40):
        y = rng.uniform(t.y_box.lo, t.y_box.hi, size=(4 * n, t.m)) if t.m else np.zeros((4 * n, 0))
        line = rng.normal(size=(4 * n, c1 + 1))
        line /= np.linalg.norm(line, axis=-1, keepdims=True)
        fiber = scale * rng.uniform(0.2, 1.0, size=(4 * n, 1)) * line
        w = scale * rng.normal(size=(4 * n, c2))
        u = np.concatenate([sector2_normal(fiber, w, y, ip), y], axis=-1)
        ok = t.psi.contains(u)
        out.append((line[ok], fiber[ok], w[ok], y[ok]))
        got += int(ok.sum())
        if got >= n:
            break
    parts = [np.concatenate(a)[:n] for a in zip(*out)]
    return tuple(parts)


def verify_aug_gluing(t: TubularNbhd, ip: InnerProduct, c1: int, plan: SamplePlan, n: int = 200) -> checks.Report:
    """Both gluing relations of the open-sets quotient on sampled partner pairs.

    The first pairs sector-2 points with their sector-1 partners; the second
    pairs points off the exceptional locus with their images in X - Y and
    recovers them from those images.
    """
    line, fiber, w, y = _sample_sector2(t, ip, c1, plan, n, "aug-glue")
    nn = t.n_normal
    u = np.concatenate([sector2_normal(fiber, w, y, ip), y], axis=-1)
    x2 = t(u)
    sq = ip.sq(w, y)[:, None]
    p_line = np.concatenate([sq * fiber[:, :-1], w], axis=-1)
    p_vec = u
    x1 = t(p_vec)
    rel1 = np.max(np.abs(x1 - x2), axis=-1)
    on_line = line_residual(p_line, p_vec[:, :nn])
    scale = np.maximum(1.0, np.max(np.abs(x2), axis=-1))
    rel1 = np.maximum(rel1 / scale, on_line / scale)
    # second relation: off E, recover (line, fiber tensor w) from pi(x)
    back = t.inv(x2)[:, :nn]
    a, b = back[:, :c1], back[:, c1:]
    bsq = ip.sq(b, y)[:, None]
    rec_fiber = np.concatenate([a / bsq, np.ones_like(bsq)], axis=-1)
    mat = fiber[:, :, None] * w[:, None, :]
    rec_mat = rec_fiber[:, :, None] * b[:, None, :]
    rel2 = np.maximum(
        np.max(np.abs(mat - rec_mat), axis=(-2, -1)) / np.maximum(1.0, np.max(np.abs(mat), axis=(-2, -1))),
        proj_distance(rec_fiber, line),
    )
    # sector-1 points off Y: Psi(v) lifts back to (line of v, v)
    s1 = sample_adapted(t.model_chart(), plan, "aug-glue-1", n_interior=n, n_near=0, n_on=0).coords
    s1 = s1[np.max(np.abs(s1[:, :c1]), axis=-1) > 1e-6]
    back1 = t.inv(t(s1))
    rel3 = np.maximum(proj_distance(back1[:, :nn], s1[:, :nn]), np.max(np.abs(back1 - s1), axis=-1))
    return checks.Report(
        "aug_gluing",
        (
            checks.Check("sector2_to_sector1", float(rel1.max()), plan.tol_id, len(u)),
            checks.Check("sector2_to_X", float(rel2.max()), plan.tol_id, len(u)),
            checks.Check("sector1_to_X", float(rel3.max(initial=0.0)), plan.tol_id, len(s1)),
        ),
    )


@dataclass(frozen=True)
class AugEquivData:
    """Equivalence data (h, f) for a pair of TNIs; h acts on W_2 coordinates."""

    t1: TubularNbhd
    t2: TubularNbhd
    ip: InnerProduct
    c1: int
    h: Callable[[Array], Array]

    def target_y(self, v: Array) -> Array:
        return equiv_map(self.t1, self.t2)(v)[..., self.t1.n_normal :]

    def f(self, v: Array) -> Array:
        """f with <h w, h w>' = f <w, w>, read off from the trace."""
        hz = self.h(v)
        c1 = self.c1
        h22 = hz[..., c1:, c1:]
        g_src = self.ip.at(v[..., self.t1.n_normal :])
        g_dst = self.ip.at(self.target_y(v))
        pulled = np.einsum("...ki,...kl,...lj->...ij", h22, g_dst, h22)
        return np.trace(pulled @ np.linalg.inv(g_src), axis1=-2, axis2=-1) / h22.shape[-1]


def aug_equiv_data(t1: TubularNbhd, t2: TubularNbhd, ip: InnerProduct, c1: int, h=None, plan=None) -> AugEquivData:
    plan = plan or SamplePlan()
    return AugEquivData(t1, t2, ip, c1, h if h is not None else equiv_h(t1, t2, plan.tol_id))


def tni_aug_equiv_check(t1: TubularNbhd, t2: TubularNbhd, ip: InnerProduct, c1: int, plan: SamplePlan, h=None) -> checks.Report:
    """F = R equivalence plus the N^{c1} block clause and the conformal norm clause."""
    base = tni_equiv_check(t1, t2, plan)
    data = aug_equiv_data(t1, t2, ip, c1, h, plan)
    g = equiv_map(t1, t2)
    ss = sample_adapted(t2.model_chart(), plan, "tni-aug", region=lambda v: g.contains(v))
    z = ss.coords
    hz = data.h(z)
    blk = float(np.abs(hz[:, :c1, c1:]).max())
    f = data.f(z)
    h22 = hz[:, c1:, c1:]
    g_src = ip.at(z[:, t1.n_normal :])
    g_dst = ip.at(data.target_y(z))
    pulled = np.einsum("...ki,...kl,...lj->...ij", h22, g_dst, h22)
    norm = float(np.abs(pulled - f[:, None, None] * g_src).max())
    fq = np.quantile(f, [0.0, 0.5, 1.0])
    extra = (
        checks.Check("block", blk, plan.tol_id, len(z)),
        checks.Check("conformal_norm", norm, plan.tol_id, len(z)),
        checks.Check("f_positive", float(f.min()), 0.0, len(z), mode="min",
                     detail={"f_min": float(fq[0]), "f_median": float(fq[1]), "f_max": float(fq[2])}),
    )
    return checks.Report("tni_aug_equiv", base.checks + extra)


def aug_sector2_transition(p: AugGlobalPoint, data: AugEquivData) -> AugGlobalPoint:
    """The sector-2 change of presentation from (W_2, Psi_2) to (W_1, Psi_1).

    With u = c|w|^2 v + cw built from the fiber vector and h = h(u):
    F = f + 2<h21 v, h22 w> + |w|^2 |h21 v|^2, the new line is
    [h11 v_line, F c_line], the new fiber (h11 v_fib / F, c_fib) and the new
    w is h22 w + |w|^2 h21 v_fib over the image base point.
    """
    out = sector2_transition_values(data, p.line, p.fiber, p.w, p.y)
    line, fiber, w, y, F = (a[0] for a in out)
    if not F > 0:
        raise FNonPositive(f"F = {F:.3e} is not positive at the requested point")
    return AugGlobalPoint(2, line=line, fiber=fiber, w=w, y=y)


def sector2_transition_values(data: AugEquivData, line, fiber, w, y):
    """Batched form of :func:`aug_sector2_transition`; also returns F."""
    c1 = data.c1
    ip = data.ip
    line, fiber, w, y = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (line, fiber, w, y))
    u = np.concatenate([sector2_normal(fiber, w, y, ip), y], axis=-1)
    hz = data.h(u)
    h11, h21, h22 = hz[:, :c1, :c1], hz[:, c1:, :c1], hz[:, c1:, c1:]
    y2 = data.target_y(u)
    mv = lambda a, b: np.einsum("...ij,...j->...i", a, b)
    v_fib, c_fib = fiber[:, :-1], fiber[:, -1:]
    v_line, c_line = line[:, :-1], line[:, -1:]
    a_v = mv(h21, v_fib)
    b_w = mv(h22, w)
    sq = ip.sq(w, y)
    F = data.f(u) + 2 * ip.dot(a_v, b_w, y2) + sq * ip.sq(a_v, y2)
    new_line = np.concatenate([mv(h11, v_line), F[:, None] * c_line], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        new_fiber = np.concatenate([mv(h11, v_fib) / F[:, None], c_fib], axis=-1)
    new_w = b_w + sq[:, None] * a_v
    return new_line, new_fiber, new_w, y2, F


def verify_aug_sector2_transition(data: AugEquivData, plan: SamplePlan, n: int = 500) -> checks.Report:
    """pi_1 o wt phi_2 = pi_2 on sampled sector-2 points, F > 0 and F = f where v = 0.

    The sampling box is halved until the images stay inside W_1 and F stays
    positive; the final radius is reported.
    """
    t1, t2, ip = data.t1, data.t2, data.ip
    scale = 0.5
    for level in range(11):
        line, fiber, w, y = _sample_sector2(t2, ip, data.c1, plan, n, "aug-s2", scale)
        nl, nf, nw, ny, F = sector2_transition_values(data, line, fiber, w, y)
        u1 = np.concatenate([sector2_normal(nf, nw, ny, ip), ny], axis=-1)
        inside = t1.psi.contains(u1) & (F > 0)
        if inside.all():
            break
        scale *= 0.5
    u2 = np.concatenate([sector2_normal(fiber, w, y, ip), y], axis=-1)
    x2 = t2(u2)
    x1 = t1(u1)
    res = np.max(np.abs(x1 - x2), axis=-1)
    on_line = line_residual(nl, nf)
    # F on the v = 0 slice equals f
    fib0 = fiber.copy()
    fib0[:, :-1] = 0.0
    line0 = np.zeros_like(line)
    line0[:, -1] = 1.0
    *_, F0 = sector2_transition_values(data, line0, fib0, w, y)
    u0 = np.concatenate([sector2_normal(fib0, w, y, ip), y], axis=-1)
    f_gap = float(np.max(np.abs(F0 - data.f(u0))))
    return checks.Report(
        "aug_sector2",
        (
            checks.Check("equivariance", float(res.max()), plan.tol_coc, len(res)),
            checks.Check("fiber_on_line", float(on_line.max()), plan.tol_id, len(res)),
            checks.Check("F_positive", float(F.min()), 0.0, len(res), mode="min"),
            checks.Check("F_equals_f_at_v0", f_gap, plan.tol_id, len(res)),
        ),
        {"radius": scale, "halvings": level},
    )
