"""Local construction of the F-blowup of X along Y from an F-atlas.

An F-atlas is a family of charts for Y in X together with matrix-valued
maps h_{ab} on the overlaps, h_maps[(a, b)] acting on b-coordinates z=(r, s)
so that the first c components of the overlap a o b^{-1}(z) equal h_{ab}(z) r.
Matrices act on real slots; for F = C they must commute with i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional

import numpy as np

from . import checks
from .chartcore import (
    TAU_ID,
    Array,
    ChartFn,
    FieldTag,
    Map,
    ProjPoint,
    SamplePlan,
    YChart,
    commutator_norm,
    field_reals,
    field_values,
    jacobian,
    normalize_values,
    overlap_map,
    proj_distance,
    sample_adapted,
)
from .errors import (
    ChartMiss,
    CollapsedLine,
    DomainExit,
    EmptyOverlap,
    MembershipViolation,
    QuadratureFail,
    SliceViolation,
)
from .tautological import chart_inv_values, chart_values, line_residual

HMap = Callable[[Array], Array]

_GL_START = 8
_GL_MAX = 256
_FD_STEP = 1e-3


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[Array, Array]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def hadamard_h(
    overlap: ChartFn | Map,
    c: int,
    m: int,
    field: FieldTag = FieldTag.REAL,
    tol: float = TAU_ID,
) -> HMap:
    """h(r, s) = int_0^1 d_r phi_{1..c}(t r, s) dt by adaptive Gauss-Legendre.

    Node counts double from 8 until the h-identity residual at the requested
    points is well below ``tol``. The returned map raises SliceViolation when
    the r = 0 slice is not sent into itself and QuadratureFail when 256 nodes
    do not reach ``tol``.
    """
    fwd = overlap.forward if isinstance(overlap, ChartFn) else overlap
    n = c * field.width

    def normal_part(z):
        return fwd(z)[..., :n]

    def h(z: Array) -> Array:
        z = np.asarray(z, dtype=float)
        r, s = z[..., :n], z[..., n:]
        target = normal_part(z)
        on_y = normal_part(np.concatenate([np.zeros_like(r), s], axis=-1))
        if np.max(np.abs(on_y), initial=0.0) > tol:
            raise SliceViolation("overlap does not preserve the r = 0 slice")
        k = _GL_START
        while k <= _GL_MAX:
            t, w = _gauss_legendre(k)
            pts = np.concatenate(
                [t[:, None] * r[..., None, :], np.broadcast_to(s[..., None, :], s.shape[:-1] + (k, s.shape[-1]))],
                axis=-1,
            )
            jac = jacobian(normal_part, pts, _FD_STEP, order=6, cols=range(n))
            hz = np.tensordot(w, np.moveaxis(jac, -3, 0), axes=1)
            res = np.abs(np.einsum("...ij,...j->...i", hz, r) - target)
            worst = np.max(res, initial=0.0)
            # aim for two digits of headroom, accept tol at the last level
            if worst < 1e-2 * tol or (k == _GL_MAX and worst < tol):
                return hz
            k *= 2
        raise QuadratureFail(f"h-identity residual {np.max(res):.3e} after {_GL_MAX} nodes")

    return h


def identity_h(n: int) -> HMap:
    eye = np.eye(n)
    return lambda z: np.broadcast_to(eye, np.asarray(z).shape[:-1] + (n, n)).copy()


def constant_h(a: Array) -> HMap:
    a = np.asarray(a, dtype=float)
    return lambda z: np.broadcast_to(a, np.asarray(z).shape[:-1] + a.shape).copy()


@dataclass(frozen=True)
class FAtlas:
    """Charts for Y in X with the h-maps of every overlapping ordered pair."""

    charts: Mapping[str, YChart]
    h_maps: Mapping[tuple[str, str], HMap]
    overlaps: Mapping[tuple[str, str], ChartFn] = field(default_factory=dict)
    y_sampler: Optional[Callable[[np.random.Generator, int], Array]] = None

    def __post_init__(self):
        cs = list(self.charts.values())
        if not cs:
            raise ValueError("atlas needs at least one chart")
        if len({(y.c, y.m, y.field) for y in cs}) != 1:
            raise ValueError("charts must share c, m and field")

    @property
    def names(self) -> list[str]:
        return list(self.charts)

    @property
    def c(self) -> int:
        return next(iter(self.charts.values())).c

    @property
    def m(self) -> int:
        return next(iter(self.charts.values())).m

    @property
    def field(self) -> FieldTag:
        return next(iter(self.charts.values())).field

    @property
    def n_normal(self) -> int:
        return self.c * self.field.width

    def pairs(self) -> list[tuple[str, str]]:
        return [p for p in self.overlaps if p[0] != p[1]]

    def h(self, a: str, b: str) -> HMap:
        if a == b:
            return identity_h(self.n_normal)
        return self.h_maps[(a, b)]

    def overlap(self, a: str, b: str) -> ChartFn:
        return self.overlaps[(a, b)]


def make_atlas(
    charts: Mapping[str, YChart],
    h_maps: Optional[Mapping[tuple[str, str], HMap]] = None,
    plan: Optional[SamplePlan] = None,
    y_sampler=None,
) -> FAtlas:
    """Assemble an atlas, extracting missing real h-maps by the Hadamard integral."""
    plan = plan or SamplePlan()
    given = dict(h_maps or {})
    hs: dict[tuple[str, str], HMap] = {}
    ovs: dict[tuple[str, str], ChartFn] = {}
    names = list(charts)
    for a in names:
        for b in names:
            if a == b:
                continue
            try:
                ov = overlap_map(charts[a], charts[b], plan)
            except EmptyOverlap:
                continue
            ovs[(a, b)] = ov
            if (a, b) in given:
                hs[(a, b)] = given[(a, b)]
            elif charts[a].field is FieldTag.REAL:
                y = charts[a]
                hs[(a, b)] = hadamard_h(ov, y.c, y.m, y.field, plan.tol_id)
            else:
                raise ValueError(f"complex atlas needs an explicit h-map for {(a, b)}")
    return FAtlas(dict(charts), hs, ovs, y_sampler)


def _overlap_samples(atlas: FAtlas, a: str, b: str, plan: SamplePlan, tag: str):
    return sample_adapted(atlas.charts[b], plan, f"{tag}:{a}:{b}", region=atlas.charts[a].contains)


def h_identity_residual(atlas: FAtlas, a: str, b: str, z: Array) -> Array:
    n = atlas.n_normal
    lhs = atlas.overlap(a, b)(z)[..., :n]
    rhs = np.einsum("...ij,...j->...i", atlas.h(a, b)(z), z[..., :n])
    return np.max(np.abs(lhs - rhs), axis=-1)


def verify_f_atlas(atlas: FAtlas, plan: SamplePlan) -> checks.Report:
    """h-identity, invertibility of h along Y, and (F = C) complex linearity."""
    n = atlas.n_normal
    worst_id, worst_sv, worst_cx = 0.0, np.inf, 0.0
    count = count_on = 0
    detail_id: dict[str, float] = {}
    for a, b in atlas.pairs():
        ss = _overlap_samples(atlas, a, b, plan, "atlas")
        res = h_identity_residual(atlas, a, b, ss.coords)
        detail_id[f"{a}<-{b}"] = float(res.max())
        worst_id = max(worst_id, float(res.max()))
        count += len(ss)
        on = ss.select("on")
        if len(on):
            sv = np.linalg.svd(atlas.h(a, b)(on), compute_uv=False).min()
            worst_sv = min(worst_sv, float(sv))
            count_on += len(on)
        if atlas.field is FieldTag.COMPLEX:
            worst_cx = max(worst_cx, float(commutator_norm(atlas.h(a, b)(ss.coords)).max()))
    out = [
        checks.Check("h_identity", worst_id, plan.tol_id, count, detail=detail_id),
        # with no overlaps the only h-map is the identity
        checks.Check("h_invertible_on_Y", worst_sv if count_on else (0.0 if atlas.pairs() else 1.0),
                     plan.tol_id, count_on, mode="min"),
    ]
    if atlas.field is FieldTag.COMPLEX:
        out.append(checks.Check("h_complex_linear", worst_cx, plan.tol_id, count))
    if atlas.y_sampler is not None:
        ys = atlas.y_sampler(plan.rng("atlas:cover"), plan.n_on)
        covered = np.zeros(len(ys), dtype=bool)
        for y in atlas.charts.values():
            covered |= y.contains(ys)
        out.append(checks.flag("cover_Y", bool(covered.all()), len(ys)))
    return checks.Report("f_atlas", tuple(out))


# ---------------------------------------------------------------- blowup points


@dataclass(frozen=True, eq=False)
class BlowupPoint:
    """A point of the local blowup stored in chart ``alpha``.

    ``line is None`` marks an X-side point (x off Y); otherwise (line, x)
    with the normal coordinates of x lying on the line.
    """

    alpha: str
    x: Array
    line: Optional[ProjPoint] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


def membership_residual(atlas: FAtlas, alpha: str, line_vals: Array, x: Array) -> Array:
    r = field_values(atlas.charts[alpha](x)[..., : atlas.n_normal], atlas.field)
    return line_residual(line_vals, r)


def line_of(atlas: FAtlas, p: BlowupPoint) -> Array:
    """Field values of the line of p (derived from x for X-side points)."""
    if p.line is not None:
        return p.line.values
    r = field_values(atlas.charts[p.alpha](p.x)[: atlas.n_normal], atlas.field)
    if np.max(np.abs(r)) <= TAU_ID:
        raise MembershipViolation("X-side point lies on Y")
    return r


def blowup_point(atlas: FAtlas, alpha: str, x: Array, line=None) -> BlowupPoint:
    """Validated constructor (checks the membership condition)."""
    x = np.asarray(x, dtype=float)
    if line is None:
        p = BlowupPoint(alpha, x)
        line_of(atlas, p)
        return p
    lp = line if isinstance(line, ProjPoint) else ProjPoint(line, atlas.field)
    res = float(membership_residual(atlas, alpha, lp.values, x))
    if res >= TAU_ID * max(1.0, float(np.linalg.norm(x))):
        raise MembershipViolation(f"normal coordinates off the line (residual {res:.3e})")
    return BlowupPoint(alpha, x, lp)


def chart_batch(atlas: FAtlas, alpha: str, line_vals: Array, x: Array, i: int) -> Array:
    """Blowup chart i on batches: ratios, phi_i(x), then the tail phi_j(x)."""
    n = atlas.n_normal
    z = atlas.charts[alpha](x)
    r = field_values(z[..., :n], atlas.field)
    w = chart_values(line_vals, r, i)
    return np.concatenate([field_reals(w, atlas.field), z[..., n:]], axis=-1)


def chart_inv_batch(atlas: FAtlas, alpha: str, w: Array, i: int) -> tuple[Array, Array]:
    n = atlas.n_normal
    wv = field_values(w[..., :n], atlas.field)
    line, vec = chart_inv_values(wv, i)
    z = np.concatenate([field_reals(vec, atlas.field), w[..., n:]], axis=-1)
    return line, atlas.charts[alpha].inv(z)


def blowup_chart(atlas: FAtlas, p: BlowupPoint, i: int) -> Array:
    """Coordinates of p in blowup chart i of its chart alpha."""
    lv = normalize_values(line_of(atlas, p))
    if not 1 <= i <= atlas.c or abs(lv[i - 1]) <= TAU_ID:
        raise ChartMiss(f"line has vanishing coordinate {i}")
    return chart_batch(atlas, p.alpha, lv, p.x, i)


def blowup_chart_inv(atlas: FAtlas, alpha: str, w: Array, i: int) -> BlowupPoint:
    line, x = chart_inv_batch(atlas, alpha, np.asarray(w, dtype=float), i)
    return BlowupPoint(alpha, x, ProjPoint(field_reals(line, atlas.field), atlas.field))


def transition_lines(atlas: FAtlas, a: str, b: str, line_vals: Array, x: Array) -> Array:
    """h_{ab}(phi_b(x)) applied to lines (field values in, field values out)."""
    hz = atlas.h(a, b)(atlas.charts[b](x))
    lr = field_reals(line_vals, atlas.field)
    out = np.einsum("...ij,...j->...i", hz, lr)
    norm_in = np.linalg.norm(lr, axis=-1)
    if np.any(np.linalg.norm(out, axis=-1) <= TAU_ID * norm_in):
        raise CollapsedLine("h-map kills the line")
    return field_values(out, atlas.field)


def blowup_transition(atlas: FAtlas, a: str, b: str, p: BlowupPoint) -> BlowupPoint:
    """(l, x) in chart b to chart a: (h_{ab}(phi_b(x)) l, x)."""
    if p.alpha != b:
        raise ValueError(f"point is stored in chart {p.alpha!r}, not {b!r}")
    if not (atlas.charts[a].contains(p.x) and atlas.charts[b].contains(p.x)):
        raise ChartMiss("base point outside the overlap")
    if p.line is None:
        return BlowupPoint(a, p.x)
    out = transition_lines(atlas, a, b, p.line.values, p.x)
    return BlowupPoint(a, p.x, ProjPoint(field_reals(out, atlas.field), atlas.field))


@dataclass(frozen=True)
class BlowupSpace:
    """BL_Y X presented by an atlas; points live in a designated chart."""

    atlas: FAtlas

    def blowdown(self, p: BlowupPoint) -> Array:
        return blowdown_local(self, p)

    def same(self, p: BlowupPoint, q: BlowupPoint, tol: float = 1e-7) -> bool:
        """Equality in the quotient: move q to p's chart, then compare."""
        if np.max(np.abs(p.x - q.x)) > tol:
            return False
        if (p.line is None) != (q.line is None):
            lp, lq = line_of(self.atlas, p), line_of(self.atlas, q)
        else:
            if p.line is None:
                return True
            lp = p.line.values
            lq = q.line.values
        if q.alpha != p.alpha:
            lq = transition_lines(self.atlas, p.alpha, q.alpha, lq, q.x)
        return float(proj_distance(lp, lq)) < tol


def local_blowup(atlas: FAtlas) -> BlowupSpace:
    return BlowupSpace(atlas)


def blowdown_local(space: BlowupSpace, p: BlowupPoint) -> Array:
    """(l, x) -> x; X-side points map to themselves."""
    return p.x


# ---------------------------------------------------------------- trivializations


@dataclass(frozen=True)
class NormalTrivialization:
    """Phi_alpha: (r, y) -> sum_j r_j d/dphi_{alpha;j} at y in ambient coordinates."""

    atlas: FAtlas
    alpha: str

    def frame(self, y: Array) -> Array:
        """Ambient vectors d/dphi_j at points y of Y: shape (..., n_amb, n)."""
        ch = self.atlas.charts[self.alpha]
        n = self.atlas.n_normal
        z = ch(y)
        z0 = np.concatenate([np.zeros_like(z[..., :n]), z[..., n:]], axis=-1)
        eye = np.eye(z.shape[-1])[:n]
        stencil = z0[..., None, :] + 3 * _FD_STEP * np.concatenate([eye, -eye])
        if not np.all(ch.contains(ch.inv(stencil))):
            raise DomainExit("normal stencil leaves the chart domain")
        return jacobian(ch.inv, z0, _FD_STEP, order=6, cols=range(n))

    def __call__(self, r: Array, y: Array) -> Array:
        return np.einsum("...ij,...j->...i", self.frame(y), np.asarray(r, dtype=float))

    def inverse(self, vec: Array, y: Array) -> Array:
        """Normal coordinates of an ambient vector at y (modulo TY)."""
        ch = self.atlas.charts[self.alpha]
        d = jacobian(ch, y, _FD_STEP, order=6)
        return np.einsum("...ij,...j->...i", d, vec)[..., : self.atlas.n_normal]


def normal_trivialization(atlas: FAtlas, alpha: str) -> NormalTrivialization:
    return NormalTrivialization(atlas, alpha)


# ---------------------------------------------------------------- sweeps


def _lines_for(atlas: FAtlas, alpha: str, z: Array, rng) -> Array:
    """Lines through the normal part of z; random lines over Y."""
    n = atlas.n_normal
    r = field_values(z[..., :n], atlas.field)
    small = np.max(np.abs(r), axis=-1) <= TAU_ID
    rnd = field_values(rng.normal(size=z[..., :n].shape), atlas.field)
    return np.where(small[..., None], rnd, r)


def verify_cocycle(atlas: FAtlas, plan: SamplePlan, triple: tuple[str, str, str]) -> checks.Check:
    """wt phi_{ac} = wt phi_{ab} o wt phi_{bc} on sampled triple overlaps."""
    a, b, c = triple
    ch = atlas.charts
    region = lambda x: ch[a].contains(x) & ch[b].contains(x)
    ss = sample_adapted(ch[c], plan, f"cocycle:{a}{b}{c}", region=region)
    x = ch[c].inv(ss.coords)
    lines = _lines_for(atlas, c, ss.coords, plan.rng(f"cocycle-lines:{a}{b}{c}"))
    direct = transition_lines(atlas, a, c, lines, x)
    via = transition_lines(atlas, a, b, transition_lines(atlas, b, c, lines, x), x)
    res = proj_distance(direct, via)
    return checks.Check("cocycle", float(res.max()), plan.tol_coc, len(ss), detail={"triple": f"{a}{b}{c}"})


def verify_transition_equivariance(atlas: FAtlas, plan: SamplePlan) -> checks.Check:
    """Transitions keep the base point and land on the target membership locus."""
    worst, count = 0.0, 0
    for a, b in atlas.pairs():
        ss = _overlap_samples(atlas, a, b, plan, "equiv")
        off = ss.coords[np.max(np.abs(ss.coords[:, : atlas.n_normal]), axis=-1) > 1e-7]
        x = atlas.charts[b].inv(off)
        lines = _lines_for(atlas, b, off, plan.rng("equiv-lines"))
        out = transition_lines(atlas, a, b, lines, x)
        r_a = field_values(atlas.charts[a](x)[..., : atlas.n_normal], atlas.field)
        res = proj_distance(out, r_a)
        worst = max(worst, float(res.max(initial=0.0)))
        count += len(off)
    return checks.Check("transition_membership", worst, plan.tol_coc, count)


def verify_chart_roundtrip(atlas: FAtlas, plan: SamplePlan) -> checks.Check:
    """blowup_chart_inv o blowup_chart = id on sampled blowup points."""
    worst, count = 0.0, 0
    for alpha, ch in atlas.charts.items():
        ss = sample_adapted(ch, plan, f"roundtrip:{alpha}")
        x = ch.inv(ss.coords)
        lines = normalize_values(_lines_for(atlas, alpha, ss.coords, plan.rng(f"rt-lines:{alpha}")))
        for i in range(1, atlas.c + 1):
            ok = np.abs(lines[:, i - 1]) > 1e-3
            w = chart_batch(atlas, alpha, lines[ok], x[ok], i)
            l2, x2 = chart_inv_batch(atlas, alpha, w, i)
            res = np.maximum(proj_distance(l2, lines[ok]), np.max(np.abs(x2 - x[ok]), axis=-1))
            worst = max(worst, float(res.max(initial=0.0)))
            count += int(ok.sum())
    return checks.Check("chart_roundtrip", worst, plan.tol_rt, count)


def verify_off_y_injective(atlas: FAtlas, plan: SamplePlan, n: int = 1000) -> checks.Report:
    """Blowdown off Y: distinct points stay distinct and lift back uniquely."""
    alpha = atlas.names[0]
    ch = atlas.charts[alpha]
    ss = sample_adapted(ch, plan, "offy", n_interior=n, n_near=0, n_on=0)
    z = ss.coords[np.max(np.abs(ss.coords[:, : atlas.n_normal]), axis=-1) > 1e-9]
    x = ch.inv(z)
    lines = field_values(z[:, : atlas.n_normal], atlas.field)
    down = x  # blowdown of (l, x) is x
    d2 = np.sum((down[:, None, :] - down[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    lifted = field_values(ch(down)[:, : atlas.n_normal], atlas.field)
    lift_res = float(proj_distance(lifted, lines).max(initial=0.0))
    return checks.Report(
        "off_Y",
        (
            checks.Check("pairwise_distinct", float(np.sqrt(d2.min())), 0.0, len(z), mode="min"),
            checks.Check("unique_lift", lift_res, plan.tol_id, len(z)),
        ),
    )


def exceptional_fiber_check(atlas: FAtlas, alpha: str, y: Array, k: int = 50) -> checks.Report:
    """k distinct lines over y in Y all blow down to y and stay distinct in charts."""
    n = atlas.n_normal
    rng = np.random.default_rng(k)
    if atlas.field is FieldTag.REAL and atlas.c == 2:
        th = np.pi * (np.arange(k) + 0.5) / k
        lines = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        lines = field_values(rng.normal(size=(k, n)), atlas.field)
    lines = normalize_values(lines)
    x = np.broadcast_to(np.asarray(y, dtype=float), (k, len(y)))
    down_res = float(np.max(np.abs(x - y)))
    # recover each line from the chart in which it has the largest coordinate
    rec = np.empty_like(lines)
    for idx in range(k):
        i = int(np.argmax(np.abs(lines[idx]))) + 1
        w = chart_batch(atlas, alpha, lines[idx], x[idx], i)
        rec[idx] = chart_inv_batch(atlas, alpha, w, i)[0]
    sep = proj_distance(rec[:, None, :], rec[None, :, :])
    np.fill_diagonal(sep, np.inf)
    mem = float(membership_residual(atlas, alpha, lines, x).max())
    return checks.Report(
        "exceptional_fiber",
        (
            checks.Check("blow_down_to_y", down_res, TAU_ID, k),
            checks.Check("membership", mem, TAU_ID, k),
            checks.Check("lines_distinct", float(sep.min()), 1e-6, k, mode="min"),
            checks.Check("lines_recovered", float(proj_distance(rec, lines).max()), TAU_ID, k),
        ),
    )


def chart_transition_map(atlas: FAtlas, alpha: str, i: int, j: int) -> Map:
    """Blowup chart i -> chart j of the same base chart, on chart coordinates."""

    def f(w):
        line, x = chart_inv_batch(atlas, alpha, w, i)
        return chart_batch(atlas, alpha, line, x, j)

    return f


def mobius_witness(atlas: FAtlas, alpha: str, plan: SamplePlan, n: int = 200) -> checks.Check:
    """Sign of det d(chart 1 -> chart 2) on the two components w_2 > 0, w_2 < 0."""
    if atlas.field is not FieldTag.REAL or atlas.c != 2:
        raise ValueError("witness is defined for real codimension 2")
    rng = plan.rng("mobius")
    w = rng.uniform(-0.5, 0.5, size=(n, 2 + atlas.m))
    w[:, 1] = np.where(w[:, 1] >= 0, 1.0, -1.0) * rng.uniform(0.2, 0.9, size=n)
    det = np.linalg.det(jacobian(chart_transition_map(atlas, alpha, 1, 2), w, 1e-5))
    neg = det[w[:, 1] < 0]
    pos = det[w[:, 1] > 0]
    ok = bool(len(neg) and len(pos) and np.all(neg < 0) and np.all(pos > 0))
    return checks.flag("mobius_sign", ok, n, negative=int((neg < 0).sum()), positive=int((pos > 0).sum()))


def exceptional_normal_check(atlas: FAtlas, alpha: str, plan: SamplePlan, n: int = 200) -> checks.Check:
    """On E, chart i -> j sends d/dw_i to (r_j/r_i) d/dw_j modulo TE."""
    wd = atlas.field.width
    nn = atlas.n_normal
    rng = plan.rng("exc-normal")
    worst, count = 0.0, 0
    for i in range(1, atlas.c + 1):
        for j in range(1, atlas.c + 1):
            if i == j:
                continue
            w = rng.uniform(-0.6, 0.6, size=(n, nn + atlas.m))
            w[:, (i - 1) * wd : i * wd] = 0.0
            wj = field_values(w[:, :nn], atlas.field)[:, j - 1]
            keep = np.abs(wj) > 0.1
            w = w[keep]
            jac = jacobian(chart_transition_map(atlas, alpha, i, j), w, 1e-6)
            block = jac[:, (j - 1) * wd : j * wd, (i - 1) * wd : i * wd]
            ratio = field_values(w[:, :nn], atlas.field)[:, j - 1]  # r_j / r_i in chart i
            if atlas.field is FieldTag.REAL:
                expect = ratio[:, None, None]
            else:
                expect = np.stack(
                    [np.stack([ratio.real, -ratio.imag], -1), np.stack([ratio.imag, ratio.real], -1)], -2
                )
            worst = max(worst, float(np.abs(block - expect).max(initial=0.0)))
            count += len(w)
    return checks.Check("exceptional_normal_line", worst, plan.tol_coc * 100, count)


def verify_trivializations(atlas: FAtlas, plan: SamplePlan) -> checks.Check:
    """Phi_a^{-1} o Phi_b restricted to Y equals h_{ab}(0, s)."""
    worst, count = 0.0, 0
    n = atlas.n_normal
    for a, b in atlas.pairs():
        ss = _overlap_samples(atlas, a, b, plan, "triv")
        on = ss.select("on")[: max(20, plan.n_on // 4)]
        if not len(on):
            continue
        y = atlas.charts[b].inv(on)
        fb = normal_trivialization(atlas, b).frame(y)
        ta = normal_trivialization(atlas, a)
        basis = np.stack([ta.inverse(fb[..., k], y) for k in range(n)], axis=-1)
        res = np.abs(basis - atlas.h(a, b)(on)).max()
        worst = max(worst, float(res))
        count += len(on)
    return checks.Check("trivialization_vs_h", worst, plan.tol_coc, count)
