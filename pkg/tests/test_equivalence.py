import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from blowup.chartcore import Box, ChartFn, YChart, identity_chart
from blowup.equivalence import (
    AugChartFamily,
    MergeLayout,
    TautChartFamily,
    assemble_tni,
    aug_global_charts,
    constant_trivialization,
    cut_up_aug_atlas,
    cut_up_charts,
    global_taut_charts,
    lemma31_verify,
    lemma32_verify,
    merge_tni,
    smooth_step,
    verify_adapted,
    verify_r_independence,
)
from blowup.errors import ChartMiss, CoverGap, MergeFail
from blowup.globalblow import TubularNbhd, aug_global_blowdown, aug_sector2_point, tni_equiv_check, verify_tni
from blowup.harness import examples as ex
from blowup.localblow import chart_batch, make_atlas, verify_f_atlas


def ident_tni(lo, hi, c=2):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    ident = lambda x: np.array(x, dtype=float)
    return TubularNbhd(c, len(lo) - c, ChartFn(len(lo), len(lo), ident, ident, Box(lo, hi)))


class DoubledWi(TautChartFamily):
    def coords(self, alpha, i, line, v):
        w = super().coords(alpha, i, line, v).copy()
        w[..., i - 1] *= 2.0
        return w


class FlippedSector2(AugChartFamily):
    def sector2(self, alpha, i, line, fiber, w, y):
        out = super().sector2(alpha, i, line, fiber, w, y).copy()
        out[..., 0] *= -1.0
        return out


class TestCutUp:
    def test_identity(self, plan, rng):
        t = ident_tni([-1, -1, -1], [1, 1, 1])
        at = cut_up_charts(t, [constant_trivialization("I", np.eye(2), Box(np.array([-2.0]), np.array([2.0])))], plan)
        x = rng.uniform(-0.9, 0.9, (100, 3))
        npt.assert_allclose(at.charts["I"](x), x)
        assert verify_f_atlas(at, plan).passed

    def test_rotated_h_is_constant_rotation(self, plan):
        at = cut_up_charts(ex.rotated_psi(), ex.rotated_trivs(), plan)
        z = np.array([[0.1, -0.2, 0.0], [0.3, 0.1, 0.2], [0.0, 0.0, -0.1]])
        npt.assert_allclose(at.h("A", "B")(z), ex.rotation(0.5 * z[:, 2] - 0.1), atol=1e-14)
        assert verify_r_independence(at, plan).passed
        assert verify_f_atlas(at, plan).passed

    def test_cover_gap(self, plan):
        t = ex.rotated_psi()
        with pytest.raises(CoverGap):
            cut_up_charts(t, ex.rotated_trivs()[:1], plan)


class TestTautFamily:
    @pytest.fixture
    def fam(self):
        t = ident_tni([-5, -5, -1], [5, 5, 1])
        return global_taut_charts(t, [constant_trivialization("I", np.eye(2), Box(np.array([-1.0]), np.array([1.0])))])

    def test_coordinates(self, fam):
        line = np.array([1.0, 2.0])
        npt.assert_allclose(fam.coords("I", 1, line, np.array([3.0, 6.0, 0.5])), [3.0, 2.0, 0.5])
        npt.assert_allclose(fam.coords("I", 2, line, np.array([3.0, 6.0, 0.5])), [0.5, 6.0, 0.5])
        npt.assert_allclose(fam.coords("I", 1, line, np.array([0.0, 0.0, 0.5])), [0.0, 2.0, 0.5])
        with pytest.raises(ChartMiss):
            fam.coords("I", 2, np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_agrees_with_local_charts(self, plan, rng):
        t, trivs = ex.rotated_psi(), ex.rotated_trivs()
        at = cut_up_charts(t, trivs, plan)
        fam = global_taut_charts(t, trivs)
        v = rng.uniform(-0.3, 0.3, (500, 3))
        v[:, 2] = rng.uniform(-0.9, 0.2, 500)
        line = v[:, :2] + (np.abs(v[:, :2]).max(axis=-1, keepdims=True) < 1e-8)
        for i in (1, 2):
            ok = fam.in_domain("A", i, line, v)
            a = fam.triv("A").matrix(v[ok][:, 2:])
            pl = np.einsum("...ij,...j->...i", a, line[ok])
            local = chart_batch(at, "A", pl, t(v[ok]), i)
            npt.assert_allclose(fam.coords("A", i, line[ok], v[ok]), local, atol=1e-12)

    def test_relations_real(self, plan):
        b = ex.build_real_global(plan)
        rep = lemma31_verify(global_taut_charts(b["tni"], b["trivs"]), b.atlas, plan, n=1200)
        assert rep.passed, rep
        assert rep.meta["points"] >= 1000

    def test_relations_complex(self, plan):
        b = ex.build_complex_global(plan)
        assert lemma31_verify(global_taut_charts(b["tni"], b["trivs"]), b.atlas, plan).passed

    def test_fault_doubled_wi(self, plan):
        b = ex.build_real_global(plan)
        rep = lemma31_verify(DoubledWi(b["tni"], tuple(b["trivs"])), b.atlas, plan)
        assert not rep["equal_relations"].passed
        assert rep["equal_relations"].value > 1e-3


class TestAugFamily:
    def test_worked_sample(self):
        t, ip, trivs = ex._aug_global_point()
        fam = aug_global_charts(t, ip, trivs, 1)
        wt = fam.sector2("I", 0, np.array([1.0, 2.0]), np.array([1.0, 2.0]), np.array([3.0]), np.zeros(0))
        npt.assert_allclose(wt, [0.5, 6.0])
        down = aug_global_blowdown(aug_sector2_point([1.0, 2.0], [1.0, 2.0], [3.0], np.zeros(0)), t, ip)
        npt.assert_allclose(down, [18.0, 6.0])
        npt.assert_allclose(down, [36.0 * wt[0], wt[1]])

    @pytest.mark.parametrize("build", [ex.build_aug_point, ex.build_aug_line])
    def test_relations(self, plan, build):
        b = build(plan)
        fam = aug_global_charts(b["tni"], b["ip"], b["trivs"], 1)
        assert verify_adapted(fam, plan).passed
        cut = cut_up_aug_atlas(b["tni"], b["trivs"], 1, plan)
        rep = lemma32_verify(fam, cut, plan)
        assert rep.passed, rep

    def test_fault_sign_flip(self, plan):
        b = ex.build_aug_line(plan)
        fam = FlippedSector2(b["tni"], b["ip"], tuple(b["trivs"]), 1)
        cut = cut_up_aug_atlas(b["tni"], b["trivs"], 1, plan)
        rep = lemma32_verify(fam, cut, plan)
        assert not rep["sector2_relations"].passed
        assert rep["sector1_relations"].passed

    def test_non_adapted_trivialization(self, plan):
        t, ip, _ = ex._aug_global_point()
        shear = constant_trivialization("S", np.array([[1.0, 0.5], [0.0, 1.0]]), ex.POINT)
        assert not verify_adapted(aug_global_charts(t, ip, [shear], 1), plan)["blocks"].passed


class TestMerge:
    @given(st.floats(-2, 3, allow_nan=False))
    def test_smooth_step_range(self, x):
        s = float(smooth_step(x))
        assert 0.0 <= s <= 1.0
        if x <= 0:
            assert s == 0.0
        if x >= 1:
            assert s == 1.0

    def test_smooth_step_symmetric_and_monotone(self):
        x = np.linspace(0, 1, 201)
        s = smooth_step(x)
        npt.assert_allclose(s + smooth_step(1 - x), 1.0, atol=1e-15)
        assert np.all(np.diff(s) >= 0)

    def test_layout_eta(self):
        lay = MergeLayout(0, 0.0, 1.0)
        npt.assert_allclose(lay.eta(np.array([[-1.0], [0.5], [2.0]])), [0.0, 0.5, 1.0])
        npt.assert_allclose(MergeLayout(-1, 0, 0, 1.0).eta(np.zeros((3, 1))), 1.0)

    def test_identity_halves(self, plan, rng):
        t1 = ident_tni([-0.5, -0.5, -1.0], [0.5, 0.5, 0.3])
        t2 = ident_tni([-0.5, -0.5, -0.3], [0.5, 0.5, 1.0])
        m = merge_tni(t1, t2, plan)
        npt.assert_allclose(m.y_box.lo, [-1.0])
        npt.assert_allclose(m.y_box.hi, [1.0])
        v = m.W.sample(rng, 300)
        npt.assert_allclose(m(v), v, atol=1e-14)

    def test_layout_failures(self, plan):
        t1 = ident_tni([-0.5, -0.5, -1.0, -1.0], [0.5, 0.5, 0.3, 0.3])
        t2 = ident_tni([-0.5, -0.5, -0.3, -0.3], [0.5, 0.5, 1.0, 1.0])
        with pytest.raises(MergeFail):
            merge_tni(t1, t2, plan)
        with pytest.raises(MergeFail):
            merge_tni(ident_tni([-0.5, -0.5, -1.0], [0.5, 0.5, -0.5]), ident_tni([-0.5, -0.5, 0.5], [0.5, 0.5, 1.0]), plan)

    def test_containment(self, plan):
        t1 = ident_tni([-0.5, -0.5, -1.0], [0.5, 0.5, 1.0])
        t2 = ident_tni([-0.5, -0.5, -0.3], [0.5, 0.5, 0.3])
        m = merge_tni(t1, t2, plan)
        npt.assert_allclose(m.y_box.hi, [1.0])

    def test_registered_merge(self, plan, rng):
        b = ex.build_merge(plan)
        t1, t2 = b["t1"], b["t2"]
        m = merge_tni(t1, t2, plan)
        assert verify_tni(m, plan).passed
        assert tni_equiv_check(t1, m, plan).passed
        # far on the U_2 side the merged TNI is Psi_2
        v = m.W.sample(rng, 400)
        far = v[:, 2] > t1.y_box.hi[0]
        npt.assert_allclose(m(v[far]), t2(v[far]), atol=1e-14)
        near = v[:, 2] < t2.y_box.lo[0]
        npt.assert_allclose(m(v[near]), t1(v[near]), atol=1e-14)


class TestAssemble:
    def test_single_identity_chart(self, plan, rng):
        ch = YChart(identity_chart(3, 1.0), 2, 1)
        out = assemble_tni(make_atlas({"id": ch}, plan=plan), plan)
        v = out.W.sample(rng, 200)
        npt.assert_allclose(out(v), v, atol=1e-9)
        assert verify_tni(out, plan).passed

    def test_single_linear_chart(self, plan, rng):
        a = np.eye(3)
        a[:2, :2] = ex.rotation(0.4) * 1.3
        ch = YChart(ChartFn(3, 3, lambda x: x @ a.T, lambda z: z @ np.linalg.inv(a).T, Box.cube(3, 1.0)), 2, 1)
        out = assemble_tni(make_atlas({"lin": ch}, plan=plan), plan)
        v = out.W.sample(rng, 200)
        npt.assert_allclose(out(v), v, atol=1e-9)

    def test_rotated_atlas_round_trip(self, plan):
        b = ex.build_rotated_equivalence(plan)
        out = assemble_tni(b.atlas, plan)
        assert verify_tni(out, plan).passed
        assert tni_equiv_check(b["tni"], out, plan).passed
        recut = cut_up_charts(out, b["trivs"], plan)
        assert verify_f_atlas(recut, plan).passed
