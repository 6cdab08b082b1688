import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from blowup.augblow import (
    AugParams,
    Gamma2Point,
    aug_blowdown,
    aug_blowup_point,
    aug_project,
    aug_transition,
    conformal_factor,
    exceptional_profile,
    gamma1_point,
    gamma2_point,
    in_gluing_locus,
    lift_values,
    make_aug_atlas,
    phi12_lift,
    pi1,
    pi2,
    pi2_values,
    rank1_residual,
    verify_aug_atlas,
    verify_aug_cocycle,
    verify_aug_model,
    verify_aug_transitions,
)
from blowup.chartcore import ProjPoint, YChart, identity_chart, linear_chart
from blowup.errors import GluingMiss, MembershipViolation, SectorEscape
from blowup.harness import examples as ex
from blowup.localblow import constant_h, make_atlas
from blowup.tautological import taut_chart_inv

vals = st.floats(-3, 3, allow_nan=False)


def linear_pair(a, plan, c=2, radius=1.0):
    charts = {"id": YChart(identity_chart(c, radius), c, 0), "A": YChart(linear_chart(a, radius), c, 0)}
    hs = {("A", "id"): constant_h(a), ("id", "A"): constant_h(np.linalg.inv(a))}
    return make_atlas(charts, hs, plan)


def closed_form_sector2(atlas, a, b, line, lam, s):
    """New (line, lam) from the block substitution; valid on E as well."""
    c1 = atlas.c1
    q = pi2_values(line, lam)
    z = np.concatenate([q, s], axis=-1)
    h = atlas.base.h(a, b)(z)
    h11, h21, h22 = h[:, :c1, :c1], h[:, c1:, :c1], h[:, c1:, c1:]
    r0, rp = line[:, :1], line[:, 1:]
    mv = lambda m, v: np.einsum("...ij,...j->...i", m, v)
    a_v, b_l = mv(h21, rp), mv(h22, lam)
    sq = np.sum(lam * lam, axis=-1, keepdims=True)
    f = conformal_factor(h, c1)[:, None]
    F = f + 2 * np.sum(a_v * b_l, axis=-1, keepdims=True) + sq * np.sum(a_v * a_v, axis=-1, keepdims=True)
    new_line = np.concatenate([F * r0, mv(h11, rp)], axis=-1)
    return new_line, (sq * a_v + b_l) / F


def same_sector2(l1, m1, l2, m2):
    """Compare (line, lam) pairs through the rank-1 matrices line (x) lam and the lines."""
    from blowup.chartcore import proj_distance

    return max(float(np.abs(np.einsum("i,j->ij", l1, m1) - np.einsum("i,j->ij", l2, m2)).max()),
               float(proj_distance(l1, l2)))


class TestModel:
    def test_params(self):
        assert AugParams(3, 1).c2 == 2
        with pytest.raises(ValueError):
            AugParams(2, 2)

    def test_pi1_example(self):
        npt.assert_allclose(pi1(gamma1_point([1.0, 2.0], [3.0, 6.0], 1)), [3.0, 6.0])

    def test_pi1_exceptional(self):
        npt.assert_allclose(pi1(gamma1_point([1.0, 0.0], [0.0, 0.0], 1)), [0.0, 0.0])

    def test_gamma1_rejects_line_in_subbundle(self):
        with pytest.raises(MembershipViolation):
            gamma1_point([0.0, 1.0], [0.0, 2.0], 1)

    def test_pi1_after_taut_inverse(self, rng):
        for w in rng.uniform(-2, 2, size=(100, 3)):
            p = taut_chart_inv(w, 1, 3)
            npt.assert_allclose(pi1(gamma1_point(p.line.homogeneous, p.vec, 1)), p.vec)

    def test_pi2_example(self):
        npt.assert_array_equal(pi2(gamma2_point([1.0, 2.0], [3.0])), [18.0, 3.0])

    def test_pi2_zero_fiber(self):
        npt.assert_array_equal(pi2(gamma2_point([1.0, 2.0], [0.0])), [0.0, 0.0])

    def test_lift_example(self):
        line, vec = lift_values(np.array([1.0, 2.0]), np.array([3.0]))
        npt.assert_array_equal(line, [18.0, 3.0])
        npt.assert_array_equal(vec, [18.0, 3.0])

    def test_lift_unit_example(self):
        lp = phi12_lift(gamma2_point([1.0, 1.0], [1.0]))
        npt.assert_allclose(lp.line, [1.0, 1.0])
        npt.assert_allclose(lp.vec, [1.0, 1.0])

    def test_lift_outside_locus(self):
        with pytest.raises(GluingMiss):
            phi12_lift(gamma2_point([1.0, 0.0], [1.0]))

    @given(arrays(float, 3, elements=vals), arrays(float, 2, elements=vals), st.floats(0.2, 5.0), st.sampled_from([-1.0, 1.0]))
    def test_pi2_rescale_invariant(self, line, lam, t, sign):
        if np.max(np.abs(line)) < 1e-2:
            return
        a = pi2_values(line, lam)
        b = pi2_values(sign * t * line, lam / (sign * t))
        npt.assert_allclose(a, b, atol=1e-12 * max(1.0, float(np.abs(a).max())))

    @given(arrays(float, 2, elements=vals), arrays(float, 1, elements=vals))
    def test_lift_projects_to_pi2(self, line, lam):
        if np.max(np.abs(line)) < 1e-2:
            return
        _, vec = lift_values(line, lam)
        npt.assert_allclose(vec, pi2_values(line, lam))

    def test_model_sweep(self, plan):
        rep = verify_aug_model(AugParams(3, 1), plan)
        assert rep.passed

    def test_gluing_locus_rescale(self):
        assert in_gluing_locus(np.array([1.0, 2.0]), np.array([3.0]))
        assert in_gluing_locus(np.array([1e-3, 2e-3]), np.array([3e3]))
        assert not in_gluing_locus(np.array([1.0, 0.0]), np.array([3.0]))

    def test_matrix_form(self):
        p = gamma2_point([1.0, 2.0], [3.0, -1.0])
        q = Gamma2Point.from_matrix(p.matrix)
        npt.assert_allclose(q.matrix, p.matrix, atol=1e-14)
        assert rank1_residual(p) < 1e-15
        with pytest.raises(MembershipViolation):
            Gamma2Point.from_matrix(np.eye(2))

    def test_exceptional_profiles(self):
        assert exceptional_profile(gamma2_point([1.0, 2.0], [0.0])) == "lam-zero"
        assert exceptional_profile(gamma2_point([0.0, 1.0], [2.0])) == "r0-zero"
        assert exceptional_profile(gamma2_point([0.0, 1.0], [0.0])) == "both"
        assert exceptional_profile(gamma2_point([1.0, 1.0], [1.0])) is None


class TestAugAtlas:
    def test_lower_triangular_passes(self, plan):
        at = make_aug_atlas(linear_pair(np.array([[2.0, 0.0], [1.0, 3.0]]), plan), 1)
        rep = verify_aug_atlas(at, plan)
        assert rep.passed
        npt.assert_allclose(at.f("A", "id")(np.zeros((1, 2))), [9.0])

    def test_off_block_fails(self, plan):
        at = make_aug_atlas(linear_pair(np.array([[2.0, 1.0], [0.0, 3.0]]), plan), 1)
        assert not verify_aug_atlas(at, plan)["block"].passed

    def test_rotation_times_five(self, plan):
        def h(z):
            th = 0.4 * z[..., 0]
            out = np.zeros(z.shape[:-1] + (3, 3))
            out[..., 0, 0] = 2.0
            out[..., 1:, 1:] = 5.0 * ex.rotation(th)
            return out

        def fwd(x):
            return np.einsum("...ij,...j->...i", h(x), x)

        def inv(u):
            x1 = u[..., 0] / 2.0
            rest = np.einsum("...ji,...j->...i", ex.rotation(0.4 * x1), u[..., 1:]) / 5.0
            return np.concatenate([x1[..., None], rest], axis=-1)

        from blowup.chartcore import Box, ChartFn

        charts = {"id": YChart(identity_chart(3, 1.0), 3, 0),
                  "R": YChart(ChartFn(3, 3, fwd, inv, Box.cube(3, 5.0)), 3, 0)}
        at = make_aug_atlas(make_atlas(charts, {("R", "id"): h}, plan), 1)
        rep = verify_aug_atlas(at, plan)
        assert rep.passed
        npt.assert_allclose(at.f("R", "id")(np.array([[0.1, 0.2, 0.3]])), [25.0])

    def test_registry_atlases(self, plan):
        for build in (ex.build_aug_point, ex.build_aug_line):
            assert verify_aug_atlas(build(plan)["aug"], plan).passed


class TestAugPoints:
    @pytest.fixture
    def idat(self, plan):
        return make_atlas({"id": YChart(identity_chart(2, 20.0), 2, 0)}, plan=plan)

    def test_sector1_blowdown(self, idat):
        p = aug_blowup_point(idat, "id", [3.0, 6.0], gamma1_point([1.0, 2.0], [3.0, 6.0], 1))
        npt.assert_allclose(aug_blowdown(idat, p), [3.0, 6.0])

    def test_sector2_blowdown(self, idat):
        p = aug_blowup_point(idat, "id", [18.0, 3.0], gamma2_point([1.0, 2.0], [3.0]))
        npt.assert_allclose(aug_blowdown(idat, p), [18.0, 3.0])
        npt.assert_allclose(aug_project(p.rep), [18.0, 3.0])

    def test_mismatch(self, idat):
        with pytest.raises(MembershipViolation):
            aug_blowup_point(idat, "id", [18.0, 4.0], gamma2_point([1.0, 2.0], [3.0]))


class TestAugTransitions:
    def test_identity_overlap(self, plan):
        at = make_aug_atlas(linear_pair(np.eye(2), plan), 1)
        g = gamma2_point([1.0, 0.2], [0.3])
        p = aug_blowup_point(at, "id", pi2(g), g)
        q = aug_transition(at, "A", "id", p, plan)
        assert same_sector2(q.rep.line.homogeneous, q.rep.lam, p.rep.line.homogeneous, p.rep.lam) < 1e-12

    def test_sector1_matrix_action(self, plan):
        at = make_aug_atlas(linear_pair(np.array([[2.0, 0.0], [1.0, 3.0]]), plan), 1)
        p = aug_blowup_point(at, "id", [0.0, 0.0], gamma1_point([1.0, 0.0], [0.0, 0.0], 1))
        q = aug_transition(at, "A", "id", p, plan)
        assert ProjPoint([2.0, 1.0]).distance(q.rep.taut.line) < 1e-15
        p = aug_blowup_point(at, "id", [0.1, 0.0], gamma1_point([1.0, 0.0], [0.1, 0.0], 1))
        npt.assert_allclose(aug_transition(at, "A", "id", p, plan).rep.vec, [0.2, 0.1])

    def test_sector_escape(self, plan):
        at = make_aug_atlas(linear_pair(np.array([[0.0, 1.0], [1.0, 0.0]]), plan), 1)
        p = aug_blowup_point(at, "id", [0.0, 0.0], gamma1_point([1.0, 0.0], [0.0, 0.0], 1))
        with pytest.raises(SectorEscape):
            aug_transition(at, "A", "id", p, plan)

    def test_equivariance_sweeps(self, plan):
        for build in (ex.build_aug_point, ex.build_aug_line):
            rep = verify_aug_transitions(build(plan)["aug"], plan)
            assert rep.passed, rep
            assert rep["sector2_equivariance"].samples >= 500

    def test_cocycle(self, plan):
        chk = verify_aug_cocycle(ex.build_aug_point(plan)["aug"], plan, ("id", "lin", "nl"))
        assert chk.passed and chk.samples >= 500

    @pytest.mark.parametrize("kind", ["generic", "lam-zero", "r0-zero"])
    def test_closed_form_dual_route(self, plan, rng, kind):
        at = ex.build_aug_line(plan)["aug"]
        n = 60
        line = np.concatenate([np.ones((n, 1)), rng.uniform(-1, 1, (n, 1))], axis=-1)
        lam = rng.uniform(-0.5, 0.5, (n, 1))
        if kind == "lam-zero":
            lam[:] = 0.0
        if kind == "r0-zero":
            line[:, 0] = 0.0
            line[:, 1] = 1.0
        s = rng.uniform(-0.8, 0.8, (n, 1))
        expect_l, expect_m = closed_form_sector2(at, "a", "b", line, lam, s)
        worst = 0.0
        for k in range(n):
            x = np.concatenate([pi2_values(line[k], lam[k]), s[k]])
            p = aug_blowup_point(at, "b", x, gamma2_point(line[k], lam[k]))
            q = aug_transition(at, "a", "b", p, plan)
            worst = max(worst, same_sector2(q.rep.line.homogeneous, q.rep.lam, expect_l[k], expect_m[k]))
        assert worst < plan.tol_coc
