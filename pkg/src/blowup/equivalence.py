"""Passing between tubular data and atlases.

Trivializations are linear in the normal coordinates: Phi_alpha(r, y) =
(A_alpha(y) r, y) over a box U_alpha of Y-coordinates. Cutting a TNI by them
gives charts phi_alpha = Phi_alpha o Psi^{-1}; assembling goes the other way
through per-chart TNIs folded together by merge_tni.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import checks
from .augblow import AugAtlas, make_aug_atlas
from .chartcore import (
    TAU_ID,
    TAU_RT,
    Array,
    Box,
    ChartFn,
    FieldTag,
    SamplePlan,
    YChart,
    commutator_norm,
    field_reals,
    field_values,
    jacobian,
    newton_inverse,
    sample_adapted,
)
from .errors import ChartMiss, CoverGap, MergeFail
from .globalblow import InnerProduct, TubularNbhd, _sample_sector2, aug_global_blowdown, equiv_map, sector2_normal, verify_tni
from .localblow import FAtlas, hadamard_h, make_atlas
from .tautological import chart_values

MatFn = Callable[[Array], Array]


@dataclass(frozen=True)
class Trivialization:
    """Phi(r, y) = (A(y) r, y) for y in the box U (real slots, F-linear A)."""

    name: str
    U: Box
    A: MatFn

    def matrix(self, y: Array) -> Array:
        return np.asarray(self.A(np.asarray(y, dtype=float)), dtype=float)

    def apply(self, v: Array, n: int) -> Array:
        v = np.asarray(v, dtype=float)
        r, y = v[..., :n], v[..., n:]
        return np.concatenate([np.einsum("...ij,...j->...i", self.matrix(y), r), y], axis=-1)

    def inverse(self, w: Array, n: int) -> Array:
        w = np.asarray(w, dtype=float)
        r, y = w[..., :n], w[..., n:]
        return np.concatenate([np.linalg.solve(self.matrix(y), r[..., None])[..., 0], y], axis=-1)


def constant_trivialization(name: str, a: Array, U: Box) -> Trivialization:
    a = np.asarray(a, dtype=float)
    return Trivialization(name, U, lambda y: np.broadcast_to(a, np.asarray(y).shape[:-1] + a.shape).copy())


def _restricted_w(t: TubularNbhd, U: Box) -> Box:
    n = t.n_normal
    return Box(np.concatenate([t.W.lo[:n], np.maximum(t.W.lo[n:], U.lo)]),
               np.concatenate([t.W.hi[:n], np.minimum(t.W.hi[n:], U.hi)]))


def _check_cover(t: TubularNbhd, trivs: Sequence[Trivialization], plan: SamplePlan) -> None:
    if t.m == 0:
        return
    ys = t.y_box.shrink(0.999).sample(plan.rng("cover"), 400)
    covered = np.zeros(len(ys), dtype=bool)
    for tr in trivs:
        covered |= tr.U.contains(ys)
    if not covered.all():
        raise CoverGap(f"{int((~covered).sum())} sampled points of Y lie in no trivialization domain")


def cut_up_chart(t: TubularNbhd, tr: Trivialization, plan: SamplePlan) -> YChart:
    """phi = Phi o Psi^{-1} on U = Psi(W restricted to U_alpha)."""
    n = t.n_normal
    wa = _restricted_w(t, tr.U)
    if wa.empty:
        raise CoverGap(f"trivialization {tr.name!r} misses W")
    pts = t(wa.sample(plan.rng(f"cut:{tr.name}"), 2000))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * (hi - lo) + 1e-3
    dom = Box(lo - pad, hi + pad)
    guard = lambda x: wa.contains(t.inv(x))
    ch = ChartFn(
        t.total_dim, t.total_dim,
        lambda x: tr.apply(t.inv(x), n),
        lambda z: t(tr.inverse(z, n)),
        dom,
        guard,
    )
    return YChart(ch, t.c, t.m, t.field)


def cut_up_charts(t: TubularNbhd, trivs: Sequence[Trivialization], plan: Optional[SamplePlan] = None) -> FAtlas:
    """The atlas cut out from (W, Psi) by the trivializations.

    Its h-maps are the transition matrices A_a(y) A_b(y)^{-1}, independent of
    the normal coordinates.
    """
    plan = plan or SamplePlan()
    _check_cover(t, trivs, plan)
    n = t.n_normal
    charts = {tr.name: cut_up_chart(t, tr, plan) for tr in trivs}
    by_name = {tr.name: tr for tr in trivs}
    hs = {}
    for a in by_name:
        for b in by_name:
            if a != b:
                ta, tb = by_name[a], by_name[b]
                hs[(a, b)] = lambda z, ta=ta, tb=tb: ta.matrix(z[..., n:]) @ np.linalg.inv(tb.matrix(z[..., n:]))
    sampler = lambda rng, k: t.embed_y(t.y_box.shrink(0.999).sample(rng, k))
    return make_atlas(charts, hs, plan, y_sampler=sampler)


def verify_r_independence(atlas: FAtlas, plan: SamplePlan) -> checks.Check:
    """Hadamard h of each overlap along the r-ladder against h on Y."""
    n = atlas.n_normal
    worst, count = 0.0, 0
    for a, b in atlas.pairs():
        ss = sample_adapted(atlas.charts[b], plan, f"rind:{a}:{b}", region=atlas.charts[a].contains, n_interior=0, n_on=0)
        if not len(ss):
            continue
        z = ss.coords
        z0 = z.copy()
        z0[:, :n] = 0.0
        hh = hadamard_h(atlas.overlap(a, b), atlas.c, atlas.m, atlas.field, plan.tol_id)
        drift = np.abs(hh(z) - atlas.h(a, b)(z0)).max()
        worst = max(worst, float(drift))
        count += len(z)
    return checks.Check("h_r_independent", worst, plan.tol_id, count)


# ---------------------------------------------------------------- tautological charts from trivializations


@dataclass(frozen=True)
class TautChartFamily:
    """The charts wt phi_{alpha;i} on the global blowup of (W, Psi)."""

    t: TubularNbhd
    trivs: Sequence[Trivialization]

    def triv(self, alpha: str) -> Trivialization:
        for tr in self.trivs:
            if tr.name == alpha:
                return tr
        raise KeyError(alpha)

    def frame_values(self, alpha: str, line: Array, v: Array):
        """Phi_alpha applied to the line and to v, as field values."""
        t = self.t
        n = t.n_normal
        a = self.triv(alpha).matrix(v[..., n:])
        pl = field_values(np.einsum("...ij,...j->...i", a, line), t.field)
        pv = field_values(np.einsum("...ij,...j->...i", a, v[..., :n]), t.field)
        return pl, pv

    def in_domain(self, alpha: str, i: int, line: Array, v: Array, tol: float = 1e-6) -> Array:
        pl, _ = self.frame_values(alpha, line, v)
        big = np.max(np.abs(pl), axis=-1)
        return self.triv(alpha).U.contains(v[..., self.t.n_normal:]) & (np.abs(pl[..., i - 1]) > tol * big)

    def coords(self, alpha: str, i: int, line: Array, v: Array) -> Array:
        """w_j = Phi_j(l) / Phi_i(l) (j != i), w_i = Phi_i(v), then the y tail."""
        line = np.asarray(line, dtype=float)
        v = np.asarray(v, dtype=float)
        pl, pv = self.frame_values(alpha, line, v)
        if np.any(np.abs(pl[..., i - 1]) <= TAU_ID * np.max(np.abs(pl), axis=-1)):
            raise ChartMiss(f"line has vanishing coordinate {i} in trivialization {alpha!r}")
        w = chart_values(pl, pv, i)
        return np.concatenate([field_reals(w, self.t.field), v[..., self.t.n_normal:]], axis=-1)


def global_taut_charts(t: TubularNbhd, trivs: Sequence[Trivialization]) -> TautChartFamily:
    return TautChartFamily(t, tuple(trivs))


def _global_samples(t: TubularNbhd, plan: SamplePlan, n: int, stream: str):
    """Points (line, v) of the global blowup: lines through r, random over Y."""
    nn = t.n_normal
    ss = sample_adapted(t.model_chart(), plan, stream, n_interior=n // 2, n_near=n - n // 2 - n // 6, n_on=n // 6)
    v = ss.coords
    rng = plan.rng(stream + ":lines")
    on = np.max(np.abs(v[:, :nn]), axis=-1) <= TAU_ID
    line = np.where(on[:, None], rng.normal(size=(len(v), nn)), v[:, :nn])
    return line, v


def lemma31_verify(charts: TautChartFamily, atlas: FAtlas, plan: SamplePlan, n: int = 1200) -> checks.Report:
    """phi_{a;j} o pi against the chart coordinates wt phi_{a;i;j}, plus covering."""
    t = charts.t
    c, nn = t.c, t.n_normal
    line, v = _global_samples(t, plan, n, "lemma31")
    x = t(v)
    worst_prod, worst_eq, n_eval = 0.0, 0.0, 0
    uncovered = 0
    points = np.zeros(len(v), dtype=bool)
    for tr in charts.trivs:
        over = tr.U.contains(v[:, nn:]) & atlas.charts[tr.name].contains(x)
        if not over.any():
            continue
        points |= over
        phi = atlas.charts[tr.name](x[over])
        pv = field_values(phi[:, :nn], t.field)
        covered = np.zeros(int(over.sum()), dtype=bool)
        for i in range(1, c + 1):
            dom = charts.in_domain(tr.name, i, line[over], v[over])
            covered |= dom
            if not dom.any():
                continue
            w = charts.coords(tr.name, i, line[over][dom], v[over][dom])
            wv = field_values(w[:, :nn], t.field)
            p = pv[dom]
            others = [j for j in range(c) if j != i - 1]
            prod = np.abs(p[:, others] - wv[:, others] * p[:, i - 1 : i])
            eq = np.concatenate([np.abs(p[:, i - 1] - wv[:, i - 1])[:, None], np.abs(phi[dom][:, nn:] - w[:, nn:])], axis=-1)
            worst_prod = max(worst_prod, float(prod.max(initial=0.0)))
            worst_eq = max(worst_eq, float(eq.max(initial=0.0)))
            n_eval += int(dom.sum())
        uncovered += int((~covered).sum())
    return checks.Report(
        "lemma31",
        (
            checks.Check("product_relations", worst_prod, plan.tol_coc, n_eval),
            checks.Check("equal_relations", worst_eq, plan.tol_coc, n_eval),
            checks.Check("uncovered", float(uncovered), 0.5, int(points.sum())),
        ),
        {"points": int(points.sum())},
    )


# ---------------------------------------------------------------- augmented charts from trivializations


@dataclass(frozen=True)
class AugChartFamily:
    """The charts wt phi^1_{a;i} (i in [c1]) and wt phi^2_{a;i} (i in [[c1]])."""

    t: TubularNbhd
    ip: InnerProduct
    trivs: Sequence[Trivialization]
    c1: int

    def triv(self, alpha: str) -> Trivialization:
        for tr in self.trivs:
            if tr.name == alpha:
                return tr
        raise KeyError(alpha)

    def _phi_n(self, alpha: str, vec: Array, y: Array) -> Array:
        """Phi_alpha on a normal vector (first c components)."""
        return np.einsum("...ij,...j->...i", self.triv(alpha).matrix(y), vec)

    def sector1(self, alpha: str, i: int, line: Array, vec: Array) -> Array:
        if not 1 <= i <= self.c1:
            raise ChartMiss(f"sector-1 chart index {i} outside 1..{self.c1}")
        return TautChartFamily(self.t, self.trivs).coords(alpha, i, line, vec)

    def sector2(self, alpha: str, i: int, line: Array, fiber: Array, w: Array, y: Array) -> Array:
        """wt phi^2_{alpha;i}; the line is [v, c] with the trivial slot last."""
        c, c1 = self.t.c, self.c1
        line, fiber, w, y = (np.asarray(a, dtype=float) for a in (line, fiber, w, y))
        pad1 = np.zeros(line.shape[:-1] + (c - c1,))
        pad2 = np.zeros(w.shape[:-1] + (c1,))
        pv = self._phi_n(alpha, np.concatenate([line[..., :c1], pad1], axis=-1), y)
        pv2 = self._phi_n(alpha, np.concatenate([fiber[..., :c1], pad1], axis=-1), y)
        pw = self._phi_n(alpha, np.concatenate([pad2, w], axis=-1), y)
        cl = line[..., c1]
        cf = fiber[..., c1:]
        out = np.empty(line.shape[:-1] + (c,))
        if i == 0:
            if np.any(np.abs(cl) <= TAU_ID * np.max(np.abs(line), axis=-1)):
                raise ChartMiss("line has vanishing trivial slot")
            out[..., :c1] = pv[..., :c1] / cl[..., None]
            out[..., c1:] = cf * pw[..., c1:]
        else:
            di = pv[..., i - 1]
            if np.any(np.abs(di) <= TAU_ID * np.max(np.abs(line), axis=-1)):
                raise ChartMiss(f"line has vanishing coordinate {i}")
            out[..., 0] = cl / di
            for j in range(2, c1 + 1):
                src = j - 1 if j <= i else j
                out[..., j - 1] = pv[..., src - 1] / di
            out[..., c1:] = pv2[..., i - 1 : i] * pw[..., c1:]
        return np.concatenate([out, y], axis=-1)

    def sector2_domain(self, alpha: str, i: int, line: Array, y: Array, tol: float = 1e-6) -> Array:
        c = self.t.c
        big = np.max(np.abs(line), axis=-1)
        inside = self.triv(alpha).U.contains(y)
        if i == 0:
            return inside & (np.abs(line[..., self.c1]) > tol * big)
        pad = np.zeros(line.shape[:-1] + (c - self.c1,))
        pv = self._phi_n(alpha, np.concatenate([line[..., : self.c1], pad], axis=-1), y)
        return inside & (np.abs(pv[..., i - 1]) > tol * big)


def aug_global_charts(t: TubularNbhd, ip: InnerProduct, trivs: Sequence[Trivialization], c1: int) -> AugChartFamily:
    return AugChartFamily(t, ip, tuple(trivs), c1)


def verify_adapted(charts: AugChartFamily, plan: SamplePlan, n: int = 200) -> checks.Report:
    """Phi(N^{c1}) in 0 x R^{c2}, Phi(N') in R^{c1} x 0 and |Phi(w)|^2 = <w, w>."""
    c1 = charts.c1
    t = charts.t
    worst_b, worst_n = 0.0, 0.0
    for tr in charts.trivs:
        y = tr.U.intersect(t.y_box).sample(plan.rng(f"adapted:{tr.name}"), n) if t.m else np.zeros((n, 0))
        a = tr.matrix(y)
        worst_b = max(worst_b, float(np.abs(a[:, :c1, c1:]).max()), float(np.abs(a[:, c1:, :c1]).max()))
        a22 = a[:, c1:, c1:]
        gram = np.einsum("...ki,...kj->...ij", a22, a22)
        worst_n = max(worst_n, float(np.abs(gram - charts.ip.at(y)).max()))
    k = n * len(charts.trivs)
    return checks.Report("adapted", (checks.Check("blocks", worst_b, plan.tol_id, k), checks.Check("norm", worst_n, plan.tol_id, k)))


def _sector2_samples(t: TubularNbhd, ip: InnerProduct, c1: int, plan: SamplePlan, n: int):
    """Sector-2 points including both exceptional families and c = 0."""
    line, fiber, w, y = _sample_sector2(t, ip, c1, plan, n, "lemma32-s2")
    k = len(line)
    mode = np.arange(k) % 5
    fiber = fiber.copy()
    w = w.copy()
    line = line.copy()
    line[mode == 1, c1] = 0.0  # c = 0: the line lies in N'
    fiber[mode == 1, c1] = 0.0
    fiber[mode == 2] = 0.0  # zero section
    w[mode == 3] = 0.0
    return line, fiber, w, y


def lemma32_verify(charts: AugChartFamily, atlas: AugAtlas | FAtlas, plan: SamplePlan, n: int = 600) -> checks.Report:
    """Every relation between phi_alpha o pi and the augmented chart families."""
    t, ip, c1 = charts.t, charts.ip, charts.c1
    c, nn = t.c, t.n_normal
    base = atlas.base if isinstance(atlas, AugAtlas) else atlas
    worst1, worst2, worst_tail = 0.0, 0.0, 0.0
    n1 = n2 = 0
    uncovered = 0
    # sector 1
    line, v = _global_samples(t, plan, n, "lemma32-s1")
    ok = np.max(np.abs(line[:, :c1]), axis=-1) > 1e-3 * np.max(np.abs(line), axis=-1)
    line, v = line[ok], v[ok]
    x1 = t(v)
    for tr in charts.trivs:
        over = tr.U.contains(v[:, nn:]) & base.charts[tr.name].contains(x1)
        if not over.any():
            continue
        phi = base.charts[tr.name](x1[over])
        cov = np.zeros(int(over.sum()), dtype=bool)
        fam = TautChartFamily(t, charts.trivs)
        for i in range(1, c1 + 1):
            dom = fam.in_domain(tr.name, i, line[over], v[over])
            cov |= dom
            if not dom.any():
                continue
            w = charts.sector1(tr.name, i, line[over][dom], v[over][dom])
            p = phi[dom]
            others = [j for j in range(c) if j != i - 1]
            r = np.abs(p[:, others] - w[:, others] * p[:, i - 1 : i])
            worst1 = max(worst1, float(r.max(initial=0.0)), float(np.abs(p[:, i - 1] - w[:, i - 1]).max()))
            worst_tail = max(worst_tail, float(np.abs(p[:, c:] - w[:, c:]).max(initial=0.0)))
            n1 += int(dom.sum())
        uncovered += int((~cov).sum())
    # sector 2
    line, fiber, w2, y = _sector2_samples(t, ip, c1, plan, n)
    u = np.concatenate([sector2_normal(fiber, w2, y, ip), y], axis=-1)
    x2 = t(u)
    for tr in charts.trivs:
        over = tr.U.contains(y) & base.charts[tr.name].contains(x2)
        if not over.any():
            continue
        phi = base.charts[tr.name](x2[over])
        cov = np.zeros(int(over.sum()), dtype=bool)
        for i in range(0, c1 + 1):
            dom = charts.sector2_domain(tr.name, i, line[over], y[over])
            cov |= dom
            if not dom.any():
                continue
            wt = charts.sector2(tr.name, i, line[over][dom], fiber[over][dom], w2[over][dom], y[over][dom])
            p = phi[dom]
            s = np.sum(wt[:, c1:c] ** 2, axis=-1)
            res = []
            for j in range(1, c + 1):
                if j > c1:
                    factor = 1.0 if i == 0 else wt[:, 0]
                    pred = wt[:, j - 1] * factor
                elif i == 0:
                    pred = s * wt[:, j - 1]
                elif i == j:
                    pred = s * wt[:, 0]
                elif i < j:
                    pred = s * wt[:, 0] * wt[:, j - 1]
                else:
                    pred = s * wt[:, 0] * wt[:, j]
                res.append(np.abs(p[:, j - 1] - pred))
            worst2 = max(worst2, float(np.max(res)))
            worst_tail = max(worst_tail, float(np.abs(p[:, c:] - wt[:, c:]).max(initial=0.0)))
            n2 += int(dom.sum())
        uncovered += int((~cov).sum())
    return checks.Report(
        "lemma32",
        (
            checks.Check("sector1_relations", worst1, plan.tol_coc, n1),
            checks.Check("sector2_relations", worst2, plan.tol_coc, n2),
            checks.Check("tail_relations", worst_tail, plan.tol_coc, n1 + n2),
            checks.Check("uncovered", float(uncovered), 0.5, n1 + n2),
        ),
    )


def cut_up_aug_atlas(t: TubularNbhd, trivs: Sequence[Trivialization], c1: int, plan: Optional[SamplePlan] = None) -> AugAtlas:
    """The cut-up atlas of adapted trivializations; its conformal factors are 1."""
    return make_aug_atlas(cut_up_charts(t, trivs, plan), c1)


# ---------------------------------------------------------------- merging


def smooth_step(x: Array) -> Array:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    f = lambda s: np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    with np.errstate(over="ignore"):
        a, b = f(x), f(1.0 - x)
    return a / (a + b)


@dataclass(frozen=True)
class MergeLayout:
    """Where the bump eta climbs from 0 (U_1 side) to 1 (U_2 side)."""

    axis: int  # -1 means eta is constant
    start: float
    stop: float
    const: float = 0.0

    def eta(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        if self.axis < 0:
            return np.full(y.shape[:-1], self.const)
        return smooth_step((y[..., self.axis] - self.start) / (self.stop - self.start))


def _layout(u1: Box, u2: Box) -> tuple[MergeLayout, Box]:
    if u1.dim == 0:
        return MergeLayout(-1, 0.0, 0.0, 0.0), u1
    inside = lambda a, b: bool(np.all(a.lo >= b.lo) and np.all(a.hi <= b.hi))
    if inside(u2, u1):
        return MergeLayout(-1, 0.0, 0.0, 0.0), u1
    if inside(u1, u2):
        return MergeLayout(-1, 0.0, 0.0, 1.0), u2
    diff = np.flatnonzero((u1.lo != u2.lo) | (u1.hi != u2.hi))
    if len(diff) != 1:
        raise MergeFail("base boxes must differ along exactly one axis")
    k = int(diff[0])
    lo, hi = max(u1.lo[k], u2.lo[k]), min(u1.hi[k], u2.hi[k])
    if hi <= lo:
        raise MergeFail("base boxes do not overlap")
    d = hi - lo
    if u1.lo[k] < u2.lo[k]:
        lay = MergeLayout(k, lo + 0.25 * d, lo + 0.75 * d)
    else:
        lay = MergeLayout(k, hi - 0.25 * d, hi - 0.75 * d)
    union = Box(np.minimum(u1.lo, u2.lo), np.maximum(u1.hi, u2.hi))
    return lay, union


def merge_tni(t1: TubularNbhd, t2: TubularNbhd, plan: Optional[SamplePlan] = None) -> TubularNbhd:
    """One TNI over U_1 u U_2 equivalent to both inputs.

    exp_Y is straight-line motion in the Y-coordinates and its lift is the
    constant-frame transport, so theta(v) = y(G(v)) - y and h_theta = h with
    G = Psi_1^{-1} o Psi_2. The middle case then reads
    Psi_1((1 - eta) v + eta G(v)); eta is a smooth step supported on the
    U_2 side of the overlap. The normal radius is halved until the result
    passes verify_tni and its Newton inverse round-trips.
    """
    plan = plan or SamplePlan()
    n = t1.n_normal
    lay, union = _layout(t1.y_box, t2.y_box)
    g = equiv_map(t1, t2)
    rho = float(min(np.min(t1.W.hi[:n]), np.min(-t1.W.lo[:n]), np.min(t2.W.hi[:n]), np.min(-t2.W.lo[:n])))

    def forward(v):
        v = np.asarray(v, dtype=float)
        eta = lay.eta(v[..., n:])[..., None]
        out = np.empty(v.shape[:-1] + (t1.total_dim,))
        left = eta[..., 0] <= 0.0
        right = eta[..., 0] >= 1.0
        mid = ~(left | right)
        if left.any():
            out[left] = t1(v[left])
        if right.any():
            out[right] = t2(v[right])
        if mid.any():
            vm = v[mid]
            out[mid] = t1((1.0 - eta[mid]) * vm + eta[mid] * g(vm))
        return out

    def inverse(x):
        x = np.asarray(x, dtype=float)
        a, b = t1.inv(x), t2.inv(x)
        use_b = lay.eta(b[..., n:]) >= 0.5
        guess = np.where(use_b[..., None], b, a)
        return newton_inverse(forward, x, guess)

    for level in range(11):
        r = rho * 0.5**level
        dom = Box(np.concatenate([np.full(n, -r), union.lo]), np.concatenate([np.full(n, r), union.hi]))
        psi = ChartFn(t1.psi.dim_in, t1.total_dim, forward, inverse, dom)
        out = TubularNbhd(t1.c, t1.m, psi, t1.field, t1.embed, t1.embed_inv, t1.normal_frame, t1.base_charts)
        probe = dom.sample(plan.rng(f"merge:{level}"), 200)
        eta = lay.eta(probe[:, n:])
        mid = (eta > 0) & (eta < 1)
        if mid.any() and not np.all(g.contains(probe[mid])):
            continue
        if psi.roundtrip_residual(probe) >= plan.tol_rt:
            continue
        if verify_tni(out, plan).passed:
            return out
    raise MergeFail("no shrinkage level produced a tubular neighborhood identification")


# ---------------------------------------------------------------- assembly


def chart_trivialization(chart: YChart, y: Array, embed, frame) -> tuple[Array, Array]:
    """A(y) = normal block of d phi along the normal frame, and s(y) = tail of phi on Y."""
    n = chart.n_normal
    x = embed(y)
    d = jacobian(chart, x, 1e-5, order=6)
    a = np.einsum("...ij,...jk->...ik", d[..., :n, :], frame(y))
    return a, chart(x)[..., n:]


def tni_from_chart(chart: YChart, U: Box, template: TubularNbhd, plan: SamplePlan, name: str = "") -> TubularNbhd:
    """Psi_alpha(r, y) = phi^{-1}(A(y) r, s(y)) with its explicit inverse."""
    n = chart.n_normal
    embed, frame, y_of = template.embed_y, template.frame, template.y_of

    def forward(v):
        v = np.asarray(v, dtype=float)
        a, s = chart_trivialization(chart, v[..., n:], embed, frame)
        return chart.inv(np.concatenate([np.einsum("...ij,...j->...i", a, v[..., :n]), s], axis=-1))

    def inverse(x):
        z = chart(np.asarray(x, dtype=float))
        y = y_of(chart.inv(np.concatenate([np.zeros_like(z[..., :n]), z[..., n:]], axis=-1)))
        a, _ = chart_trivialization(chart, y, embed, frame)
        return np.concatenate([np.linalg.solve(a, z[..., :n, None])[..., 0], y], axis=-1)

    rng = plan.rng(f"assemble:{name}")
    r = 1.0
    for _ in range(30):
        dom = Box(np.concatenate([np.full(n, -r), U.lo]), np.concatenate([np.full(n, r), U.hi]))
        probe = dom.sample(rng, 400)
        # the stencil of chart_trivialization also has to stay inside the chart
        if np.all(chart.contains(forward(probe))):
            break
        r *= 0.5
    psi = ChartFn(len(dom.lo), chart.dim, forward, inverse, dom)
    return TubularNbhd(chart.c, chart.m, psi, chart.field, template.embed, template.embed_inv,
                       template.normal_frame, (chart,))


def _chart_y_box(chart: YChart, m: int, y_of, embed, plan: SamplePlan, name: str) -> Box:
    """The part of Y inside a chart, as a box of Y-coordinates (sampled, shrunk)."""
    if m == 0:
        return Box(np.zeros(0), np.zeros(0))
    dom = chart.chart.domain
    n = chart.n_normal
    lo, hi = dom.lo[n:], dom.hi[n:]
    ys = Box(lo, hi).sample(plan.rng(f"ybox:{name}"), 2000)
    ok = chart.contains(embed(ys))
    ys = ys[ok]
    if not len(ys):
        raise CoverGap(f"chart {name!r} does not meet Y")
    span = ys.max(axis=0) - ys.min(axis=0)
    return Box(ys.min(axis=0) + 0.02 * span, ys.max(axis=0) - 0.02 * span)


def standard_template(c: int, m: int, field: FieldTag = FieldTag.REAL) -> TubularNbhd:
    """A placeholder TNI fixing X = F^c x R^m with Y = 0 x R^m and the standard frame."""
    d = c * field.width + m
    ident = lambda x: np.array(x, dtype=float)
    return TubularNbhd(c, m, ChartFn(d, d, ident, ident, Box.cube(d, 1.0)), field)


def assemble_tni(
    atlas: FAtlas,
    plan: Optional[SamplePlan] = None,
    template: Optional[TubularNbhd] = None,
    order: Optional[Sequence[str]] = None,
) -> TubularNbhd:
    """Per-chart TNIs folded together with merge_tni in chart order."""
    plan = plan or SamplePlan()
    template = template or standard_template(atlas.c, atlas.m, atlas.field)
    names = list(order or atlas.names)
    parts = []
    for name in names:
        ch = atlas.charts[name]
        U = _chart_y_box(ch, atlas.m, template.y_of, template.embed_y, plan, name)
        parts.append(tni_from_chart(ch, U, template, plan, name))
    out = parts[0]
    for nxt in parts[1:]:
        out = merge_tni(out, nxt, plan)
    return out


def union_atlas(a: FAtlas, b: FAtlas, plan: Optional[SamplePlan] = None, prefix: str = "cut:") -> FAtlas:
    """Charts of both atlases; h-maps across the two are extracted afresh."""
    plan = plan or SamplePlan()
    charts = dict(a.charts)
    charts.update({prefix + k: v for k, v in b.charts.items()})
    hs = dict(a.h_maps)
    hs.update({(prefix + p, prefix + q): h for (p, q), h in b.h_maps.items()})
    return make_atlas(charts, hs, plan, a.y_sampler)
