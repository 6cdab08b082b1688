"""The local c1-augmented blowup.

Sector 1 is the part of the real tautological bundle over RP^{c-1} whose
lines are not inside 0 x R^{c2}. Sector 2 is the c2-fold sum of the
tautological bundle over RP^{c1}, stored as a line (r_0, ..., r_{c1}) and a
vector lam in R^{c2}; the fiber matrix v_ij = r_i lam_j is derived.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from . import checks
from .chartcore import (
    TAU_COC,
    TAU_ID,
    Array,
    FieldTag,
    ProjPoint,
    SamplePlan,
    as_point,
    normalize_values,
    proj_distance,
    sample_adapted,
)
from .errors import (
    ChartMiss,
    GluingMiss,
    LimitDivergence,
    MembershipViolation,
    SectorEscape,
)
from .localblow import FAtlas
from .tautological import TautPoint, line_residual

FMap = Callable[[Array], Array]


@dataclass(frozen=True)
class AugParams:
    c: int
    c1: int

    def __post_init__(self):
        if not 1 <= self.c1 <= self.c - 1:
            raise ValueError(f"need 1 <= c1 <= c-1, got c={self.c}, c1={self.c1}")

    @property
    def c2(self) -> int:
        return self.c - self.c1


@dataclass(frozen=True, eq=False)
class Gamma1Point:
    """A point of gamma^1: tautological point whose line leaves 0 x R^{c2}."""

    taut: TautPoint
    c1: int

    def __post_init__(self):
        if self.taut.field is not FieldTag.REAL:
            raise ValueError("augmented blowups are real")
        AugParams(self.taut.c, self.c1)
        line = normalize_values(self.taut.line.values)
        if np.max(np.abs(line[: self.c1])) <= TAU_ID:
            raise MembershipViolation("line lies in 0 x R^{c2}")

    @property
    def line(self) -> Array:
        return self.taut.line.homogeneous

    @property
    def vec(self) -> Array:
        return self.taut.vec


@dataclass(frozen=True, eq=False)
class Gamma2Point:
    """A point of gamma^2 stored as (line in RP^{c1}, lam in R^{c2})."""

    line: ProjPoint
    lam: Array

    def __post_init__(self):
        object.__setattr__(self, "lam", as_point(self.lam))
        if self.line.field is not FieldTag.REAL:
            raise ValueError("augmented blowups are real")
        if self.lam.ndim != 1 or self.lam.shape[0] < 1:
            raise ValueError("lam must be a nonempty vector")

    @classmethod
    def from_matrix(cls, v: Array) -> "Gamma2Point":
        """Recover (line, lam) from a rank-1 fiber matrix (c1+1) x c2."""
        v = as_point(v)
        u, s, vt = np.linalg.svd(v)
        if s[0] == 0.0:
            raise MembershipViolation("zero matrix does not determine a line")
        if len(s) > 1 and s[1] > TAU_ID * max(1.0, s[0]):
            raise MembershipViolation(f"fiber matrix is not rank one (s2 = {s[1]:.3e})")
        return cls(ProjPoint(u[:, 0]), s[0] * vt[0])

    @property
    def c1(self) -> int:
        return self.line.size - 1

    @property
    def c2(self) -> int:
        return self.lam.shape[0]

    @property
    def matrix(self) -> Array:
        return np.outer(self.line.homogeneous, self.lam)


GammaAuPoint = Union[Gamma1Point, Gamma2Point]


def gamma1_point(line, vec, c1: int) -> Gamma1Point:
    return Gamma1Point(TautPoint(ProjPoint(line), vec), c1)


def gamma2_point(line, lam) -> Gamma2Point:
    return Gamma2Point(ProjPoint(line), lam)


def rank1_residual(p: Gamma2Point) -> float:
    """Distance of the stored fiber matrix from the rank-1 form r_i lam_j."""
    r = normalize_values(p.line.homogeneous)
    scale = p.line.homogeneous[np.argmax(np.abs(p.line.homogeneous))]
    return float(np.max(np.abs(p.matrix - np.outer(r, scale * p.lam))))


# ---------------------------------------------------------------- projections


def pi1(p: Gamma1Point) -> Array:
    return p.vec


def pi2_values(line: Array, lam: Array) -> Array:
    """Batched pi^2: (r_0 |lam|^2 (r_1..r_{c1}), r_0 lam)."""
    r0 = line[..., :1]
    sq = np.sum(lam * lam, axis=-1, keepdims=True)
    return np.concatenate([r0 * sq * line[..., 1:], r0 * lam], axis=-1)


def pi2(p: Gamma2Point) -> Array:
    return pi2_values(p.line.homogeneous, p.lam)


def lift_values(line: Array, lam: Array) -> tuple[Array, Array]:
    """Batched wt phi^{12}: the gamma^1 line and vector of a gamma^2 point."""
    sq = np.sum(lam * lam, axis=-1, keepdims=True)
    return np.concatenate([sq * line[..., 1:], lam], axis=-1), pi2_values(line, lam)


def in_gluing_locus(line: Array, lam: Array, tol: float = TAU_ID) -> Array:
    """Block (v_ij)_{i in [c1]} nonzero, measured rescale-invariantly."""
    rn = np.linalg.norm(line, axis=-1)
    tail = np.linalg.norm(line[..., 1:], axis=-1) / rn
    lam_size = np.linalg.norm(lam, axis=-1) * rn
    return (tail > tol) & (lam_size > tol)


def phi12_lift(p: Gamma2Point) -> Gamma1Point:
    if not in_gluing_locus(p.line.homogeneous, p.lam):
        raise GluingMiss("point is outside the gluing locus gamma^{2;1}")
    line, vec = lift_values(p.line.homogeneous, p.lam)
    return Gamma1Point(TautPoint(ProjPoint(line), vec), p.c1)


def aug_project(p: GammaAuPoint) -> Array:
    """pi^1 or pi^2 by sector."""
    return pi1(p) if isinstance(p, Gamma1Point) else pi2(p)


def exceptional_profile(p: Gamma2Point, tol: float = TAU_ID) -> Optional[str]:
    """Which piece of pi^2 = 0 a sector-2 point lies on.

    ``"lam-zero"`` is the RP(N' + tau^1) family, ``"r0-zero"`` the family
    with line inside N'. Returns ``"both"`` on their intersection and None
    off the exceptional locus.
    """
    r = p.line.homogeneous / np.linalg.norm(p.line.homogeneous)
    lam_zero = np.linalg.norm(p.lam) * np.linalg.norm(p.line.homogeneous) <= tol
    r0_zero = abs(r[0]) <= tol
    if lam_zero and r0_zero:
        return "both"
    if lam_zero:
        return "lam-zero"
    if r0_zero:
        return "r0-zero"
    return None


def verify_aug_model(params: AugParams, plan: SamplePlan, n: int = 500) -> checks.Report:
    """Rescale invariance of pi^2 and of the lift, and pi^1 o lift = pi^2."""
    rng = plan.rng(f"aug-model:{params.c}:{params.c1}")
    line = rng.normal(size=(n, params.c1 + 1))
    lam = rng.normal(size=(n, params.c2))
    t = rng.uniform(0.2, 5.0, size=(n, 1)) * rng.choice([-1.0, 1.0], size=(n, 1))
    base = pi2_values(line, lam)
    scaled = pi2_values(t * line, lam / t)
    scale = np.maximum(1.0, np.max(np.abs(base), axis=-1))
    rescale = float(np.max(np.max(np.abs(base - scaled), axis=-1) / scale))
    l1, v1 = lift_values(line, lam)
    l2, _ = lift_values(t * line, lam / t)
    lift_rescale = float(np.max(proj_distance(l1, l2)))
    consist = float(np.max(np.max(np.abs(v1 - base), axis=-1) / scale))
    on_line = float(np.max(line_residual(l1, v1) / scale))
    return checks.Report(
        "aug_model",
        (
            checks.Check("pi2_rescale", rescale, plan.tol_id, n),
            checks.Check("lift_rescale", lift_rescale, plan.tol_id, n),
            checks.Check("pi1_lift_eq_pi2", consist, plan.tol_id, n),
            checks.Check("lift_on_line", on_line, plan.tol_id, n),
        ),
    )


# ---------------------------------------------------------------- atlas


@dataclass(frozen=True)
class AugAtlas:
    """A real atlas with the conformal factors f_{ab} of its h-maps."""

    base: FAtlas
    f_maps: Mapping[tuple[str, str], FMap]
    params: AugParams

    def __post_init__(self):
        if self.base.field is not FieldTag.REAL:
            raise ValueError("augmented atlases are real")
        if self.params.c != self.base.c:
            raise ValueError("c1 parameters do not match the atlas codimension")

    @property
    def c1(self) -> int:
        return self.params.c1

    @property
    def c2(self) -> int:
        return self.params.c2

    def f(self, a: str, b: str) -> FMap:
        if a == b:
            return lambda z: np.ones(np.asarray(z).shape[:-1])
        return self.f_maps[(a, b)]


def conformal_factor(h: Array, c1: int) -> Array:
    """f with |h(0, r)|^2 = f |r|^2, read off as the mean squared column norm."""
    cols = h[..., :, c1:]
    return np.sum(cols * cols, axis=(-2, -1)) / cols.shape[-1]


def make_aug_atlas(base: FAtlas, c1: int, f_maps: Optional[Mapping] = None) -> AugAtlas:
    """Attach conformal factors; missing ones are read off the h-maps."""
    fs = dict(f_maps or {})
    for a, b in base.pairs():
        if (a, b) not in fs:
            h = base.h(a, b)
            fs[(a, b)] = lambda z, h=h: conformal_factor(h(z), c1)
    return AugAtlas(base, fs, AugParams(base.c, c1))


def verify_aug_atlas(atlas: AugAtlas, plan: SamplePlan) -> checks.Report:
    """Block clause h(0 x R^{c2}) in 0 x R^{c2} and the norm clause with f."""
    c1, c2 = atlas.c1, atlas.c2
    eye = np.eye(c2)
    worst_blk, worst_norm, min_f = 0.0, 0.0, np.inf
    count = 0
    for a, b in atlas.base.pairs():
        ss = sample_adapted(atlas.base.charts[b], plan, f"aug:{a}:{b}", region=atlas.base.charts[a].contains)
        hz = atlas.base.h(a, b)(ss.coords)
        f = np.asarray(atlas.f(a, b)(ss.coords), dtype=float)
        cols = hz[..., :, c1:]
        gram = np.einsum("...ki,...kj->...ij", cols, cols)
        worst_blk = max(worst_blk, float(np.abs(hz[..., :c1, c1:]).max()))
        worst_norm = max(worst_norm, float(np.abs(gram - f[..., None, None] * eye).max()))
        min_f = min(min_f, float(f.min()))
        count += len(ss)
    return checks.Report(
        "aug_atlas",
        (
            checks.Check("block", worst_blk, plan.tol_id, count),
            checks.Check("norm", worst_norm, plan.tol_id, count),
            checks.Check("f_positive", min_f if count else 1.0, 0.0, count, mode="min"),
        ),
    )


# ---------------------------------------------------------------- blowup points


@dataclass(frozen=True, eq=False)
class AugBlowupPoint:
    """A point (w, x) of the augmented blowup of chart ``alpha``."""

    alpha: str
    x: Array
    rep: GammaAuPoint

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


def aug_membership_residual(atlas: AugAtlas | FAtlas, p: AugBlowupPoint) -> float:
    base = atlas.base if isinstance(atlas, AugAtlas) else atlas
    target = base.charts[p.alpha](p.x)[: base.c]
    return float(np.max(np.abs(aug_project(p.rep) - target)))


def aug_blowup_point(atlas: AugAtlas | FAtlas, alpha: str, x, rep: GammaAuPoint) -> AugBlowupPoint:
    p = AugBlowupPoint(alpha, x, rep)
    aug_blowdown(atlas, p)
    return p


def aug_blowdown(atlas: AugAtlas | FAtlas, p: AugBlowupPoint) -> Array:
    """(w, x) -> x after checking pi(w) = (phi_1(x), ..., phi_c(x))."""
    res = aug_membership_residual(atlas, p)
    if res >= TAU_ID * max(1.0, float(np.max(np.abs(p.x)))):
        raise MembershipViolation(f"pi(w) differs from the normal coordinates (residual {res:.3e})")
    return p.x


# ---------------------------------------------------------------- transitions


def _normalize_pair(line: Array, lam: Array, k: Optional[Array] = None):
    """Scale the line pivot to 1 and lam inversely; ``k`` fixes the pivot slot."""
    if k is None:
        mag = np.abs(line)
        top = mag.max(axis=-1, keepdims=True)
        k = np.argmax(mag >= top * (1 - 1e-12), axis=-1)
    piv = np.take_along_axis(line, k[..., None], axis=-1)
    return line / piv, lam * piv, k


def _relift(q: Array, c1: int) -> tuple[Array, Array, Array]:
    """The sector-2 preimage of q = (a, b) off E: line [1, a / |b|^2], lam = b.

    The third output marks rows with b != 0; other rows are nan.
    """
    a, b = q[..., :c1], q[..., c1:]
    sq = np.sum(b * b, axis=-1, keepdims=True)
    valid = sq[..., 0] > 0.0
    safe = np.where(valid[..., None], sq, np.nan)
    line = np.concatenate([np.ones_like(sq), a / safe], axis=-1)
    return line, np.where(valid[..., None], b, np.nan), valid


def _sector2_direct(atlas: AugAtlas, a: str, b: str, line: Array, lam: Array, s: Array):
    """Blow down, push the normal part through h_{ab}, relift (off E)."""
    base = atlas.base
    q_b = pi2_values(line, lam)
    z_b = np.concatenate([q_b, s], axis=-1)
    x = base.charts[b].inv(z_b)
    inside = base.charts[a].contains(x) & base.charts[b].contains(x)
    q_a = np.einsum("...ij,...j->...i", base.h(a, b)(z_b), q_b)
    nl, nm, valid = _relift(q_a, atlas.c1)
    return nl, nm, valid & inside


def _on_e(line: Array, lam: Array, tol: float) -> tuple[Array, Array]:
    rn = np.linalg.norm(line, axis=-1)
    r0_zero = np.abs(line[..., 0]) <= tol * rn
    lam_zero = np.linalg.norm(lam, axis=-1) * rn <= tol
    return r0_zero, lam_zero


def _romberg(vals: list[Array], ladder, tol: float) -> tuple[Array, Array]:
    """Extrapolate g(t) -> g(0) from values on a geometric ladder.

    Column j of the table removes the t^j error term. The estimates built
    from the finest grades are compared column by column; a point is
    stabilized once two successive columns agree within ``tol``.
    """
    q = ladder[0] / ladder[1]
    col = list(vals)
    best = [col[-1]]
    j = 1
    while len(col) > 1:
        f = q**j
        col = [(f * col[k + 1] - col[k]) / (f - 1.0) for k in range(len(col) - 1)]
        best.append(col[-1])
        j += 1
    n = best[0].shape[0]
    lim = np.full_like(best[0], np.nan)
    good = np.zeros(n, dtype=bool)
    with np.errstate(invalid="ignore"):
        for j in range(len(best) - 1):
            d = np.max(np.abs(best[j + 1] - best[j]), axis=-1)
            hit = (d < tol) & ~good
            lim[hit] = best[j + 1][hit]
            good |= hit
    return lim, good


def sector2_transition_batch(
    atlas: AugAtlas,
    a: str,
    b: str,
    line: Array,
    lam: Array,
    s: Array,
    ladder=None,
    tol: float = TAU_COC,
) -> tuple[Array, Array, Array]:
    """Sector-2 chart change on batches of normalized (line, lam) over tail s.

    Off E the result is the relift of h_{ab} applied to pi^2. On E the map
    is extended by evaluating at graded perturbations r_0 -> t, lam -> t e_1
    along the ladder and extrapolating to t = 0; the returned mask marks
    points whose extrapolants stabilized within ``tol``.
    """
    ladder = tuple(ladder or (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6))
    line = np.atleast_2d(np.asarray(line, dtype=float))
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    s = np.atleast_2d(np.asarray(s, dtype=float))
    line, lam, _ = _normalize_pair(line, lam)
    r0_zero, lam_zero = _on_e(line, lam, 1e-12)
    on_e = r0_zero | lam_zero
    out_line = np.full_like(line, np.nan)
    out_lam = np.full_like(lam, np.nan)
    ok = np.ones(len(line), dtype=bool)
    off = ~on_e
    if off.any():
        nl, nm, valid = _sector2_direct(atlas, a, b, line[off], lam[off], s[off])
        idx = np.flatnonzero(off)
        ok[idx[~valid]] = False
        if valid.any():
            out_line[idx[valid]], out_lam[idx[valid]], _ = _normalize_pair(nl[valid], nm[valid])
    if on_e.any():
        le, me, se = line[on_e], lam[on_e], s[on_e]
        bump_r = r0_zero[on_e][:, None].astype(float)
        bump_l = lam_zero[on_e][:, None].astype(float)
        e1 = np.zeros(me.shape[-1])
        e1[0] = 1.0
        grades = []
        for t in ladder:
            lt = le.copy()
            lt[:, 0] = lt[:, 0] + t * bump_r[:, 0]
            mt = me + t * bump_l * e1
            gl, gm, v = _sector2_direct(atlas, a, b, lt, mt, se)
            grades.append((np.where(v[:, None], gl, np.nan), np.where(v[:, None], gm, np.nan)))
        valid = ~np.isnan(grades[-1][0][:, 0])
        # one pivot slot for every grade, taken from the finest one;
        # coarse grades that leave the overlap stay nan and never stabilize
        fin_l = np.where(valid[:, None], grades[-1][0], 1.0)
        _, _, k = _normalize_pair(fin_l, np.zeros_like(me))
        vals = []
        for gl, gm in grades:
            nl, nm, _ = _normalize_pair(gl, gm, k)
            vals.append(np.concatenate([nl, nm], axis=-1))
        lim, good = _romberg(vals, ladder, tol)
        ok[on_e] = good & valid
        c1 = atlas.c1
        out_line[on_e], out_lam[on_e] = lim[:, : c1 + 1], lim[:, c1 + 1 :]
    return out_line, out_lam, ok


def aug_transition(atlas: AugAtlas, a: str, b: str, p: AugBlowupPoint, plan: Optional[SamplePlan] = None) -> AugBlowupPoint:
    """Move an augmented blowup point from chart b to chart a."""
    base = atlas.base
    if p.alpha != b:
        raise ValueError(f"point is stored in chart {p.alpha!r}, not {b!r}")
    if not (base.charts[a].contains(p.x) and base.charts[b].contains(p.x)):
        raise ChartMiss("base point outside the overlap")
    if a == b:
        return p
    z_b = base.charts[b](p.x)
    if isinstance(p.rep, Gamma1Point):
        h = base.h(a, b)(z_b)
        line = h @ p.rep.line
        if np.max(np.abs(line[: atlas.c1])) <= TAU_ID * np.max(np.abs(line)):
            raise SectorEscape("image line lies in 0 x R^{c2}")
        rep = Gamma1Point(TautPoint(ProjPoint(line), h @ p.rep.vec), atlas.c1)
        return AugBlowupPoint(a, p.x, rep)
    plan = plan or SamplePlan()
    line, lam = p.rep.line.homogeneous, p.rep.lam
    nl, nm, ok = sector2_transition_batch(atlas, a, b, line, lam, z_b[base.c :], plan.ladder, plan.tol_coc)
    if not ok[0]:
        r0_zero, lam_zero = _on_e(*_normalize_pair(line[None], lam[None])[:2], 1e-12)
        if r0_zero[0] or lam_zero[0]:
            raise LimitDivergence("graded-limit extension did not stabilize")
        raise SectorEscape("image has zero N^{c1} part or leaves the overlap")
    return AugBlowupPoint(a, p.x, Gamma2Point(ProjPoint(nl[0]), nm[0]))


# ---------------------------------------------------------------- sweeps


def _aug_samples(atlas: AugAtlas, a: str, b: str, plan: SamplePlan, n: int, tag: str):
    """Sector-1 and sector-2 representatives over sampled overlap points.

    Returns ((z, line, vec), (z2, line2, lam2)) in b-coordinates. Over Y the
    representatives are random points of the exceptional locus; off Y they
    are the unique lifts of the normal coordinates.
    """
    base = atlas.base
    c, c1 = base.c, atlas.c1
    ss = sample_adapted(
        base.charts[b], plan, f"{tag}:{a}:{b}", region=base.charts[a].contains,
        n_interior=n // 3, n_near=n - 2 * (n // 3), n_on=n // 3,
    )
    z = ss.coords
    rng = plan.rng(f"{tag}-reps:{a}:{b}")
    q = z[:, :c]
    on_y = np.max(np.abs(q), axis=-1) <= TAU_ID
    line1 = np.where(on_y[:, None], rng.normal(size=q.shape), q)
    line2, lam2, gen = _relift(q, c1)
    gen &= ~on_y
    rest = on_y
    k = int(rest.sum())
    rl = rng.normal(size=(k, c1 + 1))
    rm = rng.normal(size=(k, c - c1))
    # alternate between the two exceptional families
    pick = np.arange(k) % 2 == 0
    rl[pick, 0] = 0.0
    rm[~pick] = 0.0
    line2[rest], lam2[rest] = rl, rm
    keep = gen | on_y
    return (z, line1, q.copy()), (z[keep], line2[keep], lam2[keep])


def verify_aug_transitions(atlas: AugAtlas, plan: SamplePlan, n: int = 500) -> checks.Report:
    """Blowdown equivariance of both sectors' transitions."""
    base = atlas.base
    c, c1 = base.c, atlas.c1
    w1 = w2 = 0.0
    n1 = n2 = 0
    failed = 0
    for a, b in base.pairs():
        (z, line1, vec1), (z2, line2, lam2) = _aug_samples(atlas, a, b, plan, n, "aug-equiv")
        x = base.charts[b].inv(z)
        h = base.h(a, b)(z)
        l1 = np.einsum("...ij,...j->...i", h, line1)
        v1 = np.einsum("...ij,...j->...i", h, vec1)
        good = np.max(np.abs(l1[:, :c1]), axis=-1) > 1e-6 * np.max(np.abs(l1), axis=-1)
        qa = base.charts[a](x)[:, :c]
        r1 = np.maximum(np.max(np.abs(v1 - qa), axis=-1), line_residual(l1, v1))[good]
        w1 = max(w1, float(r1.max(initial=0.0)))
        n1 += int(good.sum())
        nl, nm, ok = sector2_transition_batch(atlas, a, b, line2, lam2, z2[:, c:], plan.ladder, plan.tol_coc)
        qa2 = base.charts[a](base.charts[b].inv(z2))[:, :c]
        res2 = np.max(np.abs(pi2_values(nl, nm) - qa2), axis=-1)[ok]
        w2 = max(w2, float(res2.max(initial=0.0)))
        n2 += int(ok.sum())
        failed += int((~ok).sum())
    return checks.Report(
        "aug_transitions",
        (
            checks.Check("sector1_equivariance", w1, plan.tol_coc, n1),
            checks.Check("sector2_equivariance", w2, plan.tol_coc, n2),
            checks.Check("limit_unstabilized", float(failed), 0.5, n2 + failed),
        ),
        {"stabilized": n2},
    )


def _same_sector2(l1, m1, l2, m2) -> Array:
    """Distance between sector-2 points: line distance plus matrix distance."""
    mat1 = l1[..., :, None] * m1[..., None, :]
    mat2 = l2[..., :, None] * m2[..., None, :]
    return np.maximum(proj_distance(l1, l2), np.max(np.abs(mat1 - mat2), axis=(-2, -1)))


def verify_aug_cocycle(atlas: AugAtlas, plan: SamplePlan, triple: tuple[str, str, str], n: int = 500) -> checks.Check:
    """Sector-2 transitions compose over sampled triple overlaps."""
    a, b, c = triple
    ch = atlas.base.charts
    cc = atlas.base.c
    region = lambda x: ch[a].contains(x) & ch[b].contains(x)
    ss = sample_adapted(ch[c], plan, f"aug-coc:{a}{b}{c}", region=region, n_interior=n // 2, n_near=n - n // 2, n_on=0)
    z = ss.coords
    q = z[:, :cc]
    keep = np.linalg.norm(q[:, atlas.c1 :], axis=-1) > 1e-9
    z, q = z[keep], q[keep]
    line, lam, _ = _relift(q, atlas.c1)
    x = ch[c].inv(z)
    s_c = z[:, cc:]
    d_l, d_m, ok1 = sector2_transition_batch(atlas, a, c, line, lam, s_c, plan.ladder)
    m_l, m_m, ok2 = sector2_transition_batch(atlas, b, c, line, lam, s_c, plan.ladder)
    v_l, v_m, ok3 = sector2_transition_batch(atlas, a, b, m_l, m_m, ch[b](x)[:, cc:], plan.ladder)
    res = _same_sector2(d_l, d_m, v_l, v_m)[ok1 & ok2 & ok3]
    return checks.Check("aug_cocycle", float(res.max(initial=0.0)), plan.tol_coc, int(len(res)))
