"""Built-in examples and the suite each one runs."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .. import augblow as aug
from .. import checks
from .. import equivalence as eq
from .. import globalblow as gb
from .. import localblow as lb
from ..chartcore import FieldTag, SamplePlan, TAU_COC, field_values, to_real
from ..errors import BlowupError, UnknownExample
from . import examples as ex

KINDS = ("real-local", "complex-local", "aug-local", "real-global", "complex-global", "aug-global", "equivalence", "merge")


@dataclass(frozen=True)
class ExampleSpec:
    name: str
    kind: str
    c: int
    c1: Optional[int]
    m: int
    seed: int
    build: Callable[[SamplePlan], ex.Built]
    summary: str = ""
    triple: Optional[tuple[str, str, str]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown example kind {self.kind!r}")


@dataclass(frozen=True)
class VerifyReport:
    example: str
    seed: int
    checks: tuple[checks.Check, ...]
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


# ---------------------------------------------------------------- suites


def _local_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    at = b.atlas
    alpha = at.names[0]
    y0 = np.zeros(at.n_normal + at.m)
    out = [
        lb.verify_f_atlas(at, plan),
        lb.verify_transition_equivariance(at, plan),
        lb.verify_chart_roundtrip(at, plan),
        lb.verify_off_y_injective(at, plan),
        lb.exceptional_fiber_check(at, alpha, y0, k=50),
        lb.exceptional_normal_check(at, alpha, plan),
        lb.verify_trivializations(at, plan),
    ]
    if spec.triple:
        out.append(lb.verify_cocycle(at, plan, spec.triple))
    if at.field is FieldTag.REAL and at.c == 2:
        out.append(lb.mobius_witness(at, alpha, plan))
    if at.field is FieldTag.COMPLEX and at.c == 2:
        out.append(cp1_transition_check(at, alpha, plan))
    return out


def _small_local_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    at = b.atlas
    return [lb.verify_f_atlas(at, plan), lb.verify_chart_roundtrip(at, plan),
            lb.exceptional_fiber_check(at, at.names[0], np.zeros(at.n_normal + at.m), k=50)]


def cp1_transition_check(atlas: lb.FAtlas, alpha: str, plan: SamplePlan, n: int = 400) -> checks.Check:
    """On E over 0, chart 1 -> chart 2 acts on the line coordinate as w -> 1/w."""
    rng = plan.rng("cp1")
    rad = rng.uniform(0.3, 3.0, n)
    ang = rng.uniform(0.0, 2 * np.pi, n)
    w = rad * np.exp(1j * ang)
    pts = to_real(np.stack([np.zeros(n, dtype=complex), w], axis=-1))
    img = field_values(lb.chart_transition_map(atlas, alpha, 1, 2)(pts), FieldTag.COMPLEX)
    res = np.maximum(np.abs(img[:, 0] - 1.0 / w), np.abs(img[:, 1]))
    return checks.Check("cp1_transition", float(res.max()), TAU_COC, n)


def worked_aug_samples() -> checks.Report:
    """pi^2 at line (1, 2), lam = 3 and the i = 0 global chart sample."""
    p = aug.pi2_values(np.array([1.0, 2.0]), np.array([3.0]))
    line, vec = aug.lift_values(np.array([1.0, 2.0]), np.array([3.0]))
    t, ip, trivs = ex._aug_global_point()
    fam = eq.aug_global_charts(t, ip, trivs, 1)
    wt = fam.sector2("I", 0, np.array([1.0, 2.0]), np.array([1.0, 2.0]), np.array([3.0]), np.zeros(0))
    down = gb.aug_global_blowdown(gb.aug_sector2_point([1.0, 2.0], [1.0, 2.0], [3.0], np.zeros(0)), t, ip)
    s = float(np.sum(wt[1:2] ** 2))
    return checks.Report(
        "worked",
        (
            checks.Check("pi2_18_3", float(np.abs(p - [18.0, 3.0]).max()), 1e-15, 1),
            checks.Check("lift_18_3", float(max(np.abs(line - [18.0, 3.0]).max(), np.abs(vec - [18.0, 3.0]).max())), 1e-15, 1),
            checks.Check("i0_chart_0.5_6", float(np.abs(wt - [0.5, 6.0]).max()), 1e-15, 1),
            checks.Check("i0_relation_18", abs(down[0] - s * wt[0]), 1e-15, 1, detail={"S": s}),
            checks.Check("i0_relation_6", abs(down[1] - wt[1] * 1.0), 1e-15, 1),
        ),
    )


def _aug_local_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    atlas: aug.AugAtlas = b["aug"]
    t, ip, trivs = b["tni"], b["ip"], b["trivs"]
    fam = eq.aug_global_charts(t, ip, trivs, spec.c1)
    cut = eq.cut_up_aug_atlas(t, trivs, spec.c1, plan)
    out = [
        lb.verify_f_atlas(b.atlas, plan),
        aug.verify_aug_model(aug.AugParams(spec.c, spec.c1), plan),
        aug.verify_aug_atlas(atlas, plan),
        aug.verify_aug_transitions(atlas, plan),
        eq.verify_adapted(fam, plan),
        aug.verify_aug_atlas(cut, plan),
        eq.lemma32_verify(fam, cut, plan),
        worked_aug_samples(),
    ]
    if spec.triple:
        out.append(aug.verify_aug_cocycle(atlas, plan, spec.triple))
    return out


def _global_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    t, t2, trivs = b["tni"], b["tni2"], b["trivs"]
    cut = b.atlas
    return [
        gb.verify_tni(t, plan),
        gb.verify_tni(t2, plan),
        gb.verify_global_blowup(gb.global_blowup_build(t, plan), plan),
        lb.verify_f_atlas(cut, plan),
        eq.verify_r_independence(cut, plan),
        eq.lemma31_verify(eq.global_taut_charts(t, trivs), cut, plan),
        gb.tni_equiv_check(t, t2, plan),
    ]


def _aug_global_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    t1, t2, ip, trivs = b["t1"], b["t2"], b["ip"], b["trivs"]
    data = gb.aug_equiv_data(t1, t2, ip, spec.c1, plan=plan)
    fam = eq.aug_global_charts(t1, ip, trivs, spec.c1)
    cut = aug.make_aug_atlas(b.atlas, spec.c1)
    return [
        gb.verify_tni(t1, plan),
        gb.verify_tni(t2, plan),
        gb.verify_inner_product(ip, t1, plan),
        gb.verify_aug_gluing(t1, ip, spec.c1, plan, n=400),
        gb.tni_aug_equiv_check(t1, t2, ip, spec.c1, plan, h=data.h),
        gb.verify_aug_sector2_transition(data, plan),
        lb.verify_f_atlas(b.atlas, plan),
        eq.verify_adapted(fam, plan),
        aug.verify_aug_atlas(cut, plan),
        eq.lemma32_verify(fam, cut, plan),
    ]


def _equivalence_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    t, trivs = b["tni"], b["trivs"]
    atlas = b.atlas
    assembled = eq.assemble_tni(atlas, plan)
    recut = eq.cut_up_charts(assembled, trivs, plan)
    both = eq.union_atlas(atlas, recut, plan)
    r_f = lb.verify_f_atlas(both, plan)
    return [
        lb.verify_f_atlas(atlas, plan),
        checks.Report("assembled_tni", gb.verify_tni(assembled, plan).checks),
        checks.Report("union_f_atlas", r_f.checks),
        gb.tni_equiv_check(t, assembled, plan),
        eq.lemma31_verify(eq.global_taut_charts(assembled, trivs), recut, plan),
    ]


def _merge_suite(spec: ExampleSpec, b: ex.Built, plan: SamplePlan) -> list:
    t1, t2 = b["t1"], b["t2"]
    merged = eq.merge_tni(t1, t2, plan)
    swapped = eq.merge_tni(t2, t1, plan)
    g = gb.equiv_map(t1, t2)
    probe = t2.W.sample(plan.rng("merge-region"), 2000)
    inside = t1.y_box.contains(probe[:, t2.n_normal:])
    solvable = g.contains(probe[inside])
    frac = float(solvable.mean()) if len(solvable) else 0.0
    return [
        lb.verify_f_atlas(b.atlas, plan),
        checks.Report("merged_tni", gb.verify_tni(merged, plan).checks, {"W": merged.W}),
        checks.Report("equiv_t1", gb.tni_equiv_check(t1, merged, plan).checks),
        checks.Report("equiv_t2", gb.tni_equiv_check(merged, t2, plan).checks),
        checks.Report("swapped_tni", gb.verify_tni(swapped, plan).checks),
        checks.Check("overlap_solvable_fraction", frac, 0.0, int(inside.sum()), mode="min"),
    ]


SUITES = {
    "real-local": _local_suite,
    "complex-local": _local_suite,
    "aug-local": _aug_local_suite,
    "real-global": _global_suite,
    "complex-global": _global_suite,
    "aug-global": _aug_global_suite,
    "equivalence": _equivalence_suite,
    "merge": _merge_suite,
}


# ---------------------------------------------------------------- registry


def _specs() -> dict[str, ExampleSpec]:
    items = [
        ExampleSpec("real-blowup-R2-origin", "real-local", 2, None, 0, 0, ex.build_r2,
                    "R^2 at the origin, three charts", ("id", "lin", "nl")),
        ExampleSpec("real-blowup-R3-origin", "real-local", 3, None, 0, 0, ex.build_r3_origin,
                    "R^3 at the origin, three charts", ("id", "lin", "nl")),
        ExampleSpec("real-blowup-R3-line", "real-local", 2, None, 1, 0, ex.build_r3_line,
                    "R^3 along a line, two rotated charts and the identity", ("id", "A", "B")),
        ExampleSpec("real-blowup-R5-origin", "real-local", 5, None, 0, 0, ex.build_r5_origin,
                    "R^5 at the origin (no mesh presentation)"),
        ExampleSpec("complex-blowup-C2-origin", "complex-local", 2, None, 0, 0, ex.build_c2,
                    "C^2 at the origin, three holomorphic charts", ("id", "lin", "nl")),
        ExampleSpec("aug-c2-c1-1", "aug-local", 2, 1, 0, 0, ex.build_aug_point,
                    "augmented blowup of R^2 at a point, c1 = 1", ("id", "lin", "nl")),
        ExampleSpec("aug-c2-c1-1-line", "aug-local", 2, 1, 1, 0, ex.build_aug_line,
                    "augmented blowup of R^3 along a line, c1 = 1"),
        ExampleSpec("aug-global-c2-c1-1-line", "aug-global", 2, 1, 1, 0, ex.build_aug_global,
                    "augmented global blowup along a line with a varying inner product"),
        ExampleSpec("real-global-R3-line", "real-global", 2, None, 1, 0, ex.build_real_global,
                    "global blowup of R^3 along a line from a TNI"),
        ExampleSpec("complex-global-C2-origin", "complex-global", 2, None, 0, 0, ex.build_complex_global,
                    "global complex blowup of C^2 at the origin from a TNI"),
        ExampleSpec("rotated-two-chart-equivalence", "equivalence", 2, None, 1, 0, ex.build_rotated_equivalence,
                    "two rotated trivializations: atlas -> TNI -> atlas"),
        ExampleSpec("merge-R3-line", "merge", 2, None, 1, 0, ex.build_merge,
                    "merging two TNIs over overlapping halves of a line"),
    ]
    return {s.name: s for s in items}


REGISTRY: dict[str, ExampleSpec] = _specs()


def get_example(name: str) -> ExampleSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownExample(f"no built-in example named {name!r}") from None


def example_names() -> list[str]:
    return list(REGISTRY)


def default_seed(spec: ExampleSpec) -> int:
    env = os.environ.get("BLOWUP_SEED")
    return int(env) if env not in (None, "") else spec.seed


def make_plan(spec: ExampleSpec, seed: Optional[int] = None, tol_id: Optional[float] = None,
              tol_coc: Optional[float] = None, samples: Optional[int] = None) -> SamplePlan:
    plan = SamplePlan(seed=default_seed(spec) if seed is None else seed)
    if samples is not None:
        plan = plan.scaled(samples / plan.total)
    if tol_id is not None:
        plan = replace(plan, tol_id=tol_id)
    if tol_coc is not None:
        plan = replace(plan, tol_coc=tol_coc)
    return plan


def build_example(name: str, plan: Optional[SamplePlan] = None) -> ex.Built:
    spec = get_example(name)
    return spec.build(plan or make_plan(spec))


def run_verify(name: str, **overrides) -> VerifyReport:
    """Build the example and run its full check list."""
    spec = get_example(name)
    plan = make_plan(spec, **overrides)
    start = time.perf_counter()
    try:
        built = spec.build(plan)
        found = checks.combine(name, SUITES[spec.kind](spec, built, plan)).checks
    except BlowupError as exc:
        # a contract error under the requested tolerances is a failed run, not a crash
        found = (checks.flag("error", False, 0, type=type(exc).__name__, message=str(exc)),)
    return VerifyReport(name, plan.seed, found, time.perf_counter() - start)
