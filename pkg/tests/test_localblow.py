import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from blowup.chartcore import (
    Box,
    ChartFn,
    FieldTag,
    ProjPoint,
    SamplePlan,
    YChart,
    complex_matrix_to_real,
    identity_chart,
    linear_chart,
)
from blowup.errors import ChartMiss, MembershipViolation, QuadratureFail, SliceViolation
from blowup.harness import examples as ex
from blowup.localblow import (
    blowup_chart,
    blowup_chart_inv,
    blowup_point,
    blowup_transition,
    constant_h,
    exceptional_fiber_check,
    hadamard_h,
    local_blowup,
    make_atlas,
    mobius_witness,
    normal_trivialization,
    verify_chart_roundtrip,
    verify_cocycle,
    verify_f_atlas,
    verify_off_y_injective,
    verify_transition_equivariance,
    verify_trivializations,
)


def chart(fwd, inv, dim, c, m, r=1.0, field=FieldTag.REAL):
    return YChart(ChartFn(dim, dim, fwd, inv, Box.cube(dim, r)), c, m, field)


class TestHadamard:
    def test_linear_forced(self, rng):
        a = np.array([[2.0, 1.0], [0.5, 3.0]])
        h = hadamard_h(lambda z: z @ a.T, 2, 0)
        z = rng.uniform(-1, 1, size=(10, 2))
        npt.assert_allclose(h(z), np.broadcast_to(a, (10, 2, 2)), atol=1e-10)

    def test_quadratic_closed_form(self):
        # phi(r) = r + r^2 has h(r) = 1 + r; at r = 2, h r = 6 = phi(2)
        h = hadamard_h(lambda z: z + z**2, 1, 0)
        hz = h(np.array([[2.0]]))
        npt.assert_allclose(hz[0, 0, 0], 3.0, atol=1e-9)
        npt.assert_allclose(hz[0, 0, 0] * 2.0, 6.0, atol=1e-9)

    def test_base_dependent_closed_form(self, rng):
        ov = lambda z: np.stack([z[..., 0] * (1 + z[..., 1] ** 2), z[..., 1]], -1)
        h = hadamard_h(ov, 1, 1)
        z = rng.uniform(-1, 1, size=(100, 2))
        npt.assert_allclose(h(z)[:, 0, 0], 1 + z[:, 1] ** 2, atol=1e-9)

    def test_transcendental_against_antiderivative(self, rng):
        # phi(r) = sin r: h(r) = (sin r) / r, the mean of cos over [0, r]
        h = hadamard_h(np.sin, 1, 0)
        r = rng.uniform(0.1, 2.0, size=(50, 1))
        npt.assert_allclose(h(r)[:, 0, 0], np.sin(r[:, 0]) / r[:, 0], atol=1e-9)

    def test_slice_not_preserved(self):
        h = hadamard_h(lambda z: z + 1.0, 1, 0)
        with pytest.raises(SliceViolation):
            h(np.array([[0.5]]))

    def test_kink_fails_quadrature(self):
        # |r| r is only C^1, so the 256-node rule cannot reach 1e-15
        h = hadamard_h(lambda z: z + np.abs(z - 0.3) * (z - 0.3) + 0.09, 1, 0, tol=1e-15)
        with pytest.raises(QuadratureFail):
            h(np.array([[0.9]]))


class TestFAtlas:
    def test_single_identity_chart(self, plan):
        at = make_atlas({"id": YChart(identity_chart(2), 2, 0)}, plan=plan)
        rep = verify_f_atlas(at, plan)
        assert rep.passed
        assert rep["h_identity"].value == 0.0

    def test_rotated_pair(self, plan):
        rot = ex.rotation(0.9)
        charts = {"id": YChart(identity_chart(2), 2, 0), "rot": YChart(linear_chart(rot), 2, 0)}
        at = make_atlas(charts, {("rot", "id"): constant_h(rot), ("id", "rot"): constant_h(rot.T)}, plan)
        assert verify_f_atlas(at, plan).passed

    def test_corrupted_h_fails(self, plan):
        rot = ex.rotation(0.9)
        charts = {"id": YChart(identity_chart(2), 2, 0), "rot": YChart(linear_chart(rot), 2, 0)}
        at = make_atlas(charts, {("rot", "id"): constant_h(1.01 * rot), ("id", "rot"): constant_h(rot.T)}, plan)
        rep = verify_f_atlas(at, plan)
        assert not rep["h_identity"].passed

    def test_conjugation_fails_complex_linearity(self, plan):
        conj = np.diag([1.0, -1.0])
        charts = {
            "id": YChart(identity_chart(2), 1, 0, FieldTag.COMPLEX),
            "bar": YChart(linear_chart(conj), 1, 0, FieldTag.COMPLEX),
        }
        at = make_atlas(charts, {("bar", "id"): constant_h(conj), ("id", "bar"): constant_h(conj)}, plan)
        rep = verify_f_atlas(at, plan)
        assert not rep.passed
        npt.assert_allclose(rep["h_complex_linear"].value, 2.0)

    def test_complex_example(self, plan):
        at = ex.build_c2(plan).atlas
        assert verify_f_atlas(at, plan).passed

    def test_cocycle_three_charts(self, plan):
        at = ex.build_r3_line(plan).atlas
        chk = verify_cocycle(at, plan, ("id", "A", "B"))
        assert chk.passed and chk.samples >= 500

    def test_equivariance_and_roundtrip(self, plan):
        at = ex.build_r2(plan).atlas
        assert verify_transition_equivariance(at, plan).passed
        assert verify_chart_roundtrip(at, plan).passed


class TestBlowupPoints:
    @pytest.fixture
    def idat(self, plan):
        return make_atlas({"id": YChart(identity_chart(2, 10.0), 2, 0)}, plan=plan)

    def test_chart_example(self, idat):
        p = blowup_point(idat, "id", [3.0, 6.0], [1.0, 2.0])
        npt.assert_allclose(blowup_chart(idat, p, 1), [3.0, 2.0])

    def test_exceptional_point(self, idat):
        p = blowup_point(idat, "id", [0.0, 0.0], [1.0, 2.0])
        npt.assert_allclose(blowup_chart(idat, p, 1), [0.0, 2.0])

    def test_chart_miss(self, idat):
        p = blowup_point(idat, "id", [0.0, 0.0], [0.0, 1.0])
        with pytest.raises(ChartMiss):
            blowup_chart(idat, p, 1)

    def test_membership(self, idat):
        with pytest.raises(MembershipViolation):
            blowup_point(idat, "id", [3.0, 5.0], [1.0, 2.0])

    def test_blowdown(self, idat):
        space = local_blowup(idat)
        npt.assert_allclose(space.blowdown(blowup_point(idat, "id", [3.0, 6.0], [1.0, 2.0])), [3.0, 6.0])
        npt.assert_allclose(space.blowdown(blowup_point(idat, "id", [0.5, 0.2])), [0.5, 0.2])

    def test_inverse_roundtrip_1000(self, idat, rng):
        w = rng.uniform(-1, 1, size=(1000, 2))
        worst = 0.0
        for row in w:
            p = blowup_chart_inv(idat, "id", row, 2)
            worst = max(worst, float(np.abs(blowup_chart(idat, p, 2) - row).max()))
        assert worst < 1e-9

    def test_transition_matrix_on_line(self, plan):
        a = np.array([[2.0, 0.0], [1.0, 1.0]])
        charts = {"id": YChart(identity_chart(2), 2, 0), "A": YChart(linear_chart(a), 2, 0)}
        at = make_atlas(charts, {("A", "id"): constant_h(a), ("id", "A"): constant_h(np.linalg.inv(a))}, plan)
        q = blowup_transition(at, "A", "id", blowup_point(at, "id", [0.0, 0.0], [1.0, 0.0]))
        assert ProjPoint([2.0, 1.0]).distance(q.line) < 1e-15
        npt.assert_array_equal(q.x, [0.0, 0.0])

    def test_identity_transition(self, idat):
        p = blowup_point(idat, "id", [0.3, 0.6], [1.0, 2.0])
        q = blowup_transition(idat, "id", "id", p)
        assert p.line.distance(q.line) < 1e-15


class TestStructure:
    def test_fiber_over_origin(self, plan):
        at = ex.build_r2(plan).atlas
        rep = exceptional_fiber_check(at, "id", np.zeros(2), k=50)
        assert rep.passed
        assert rep["lines_distinct"].samples == 50

    def test_mobius_sign(self, plan):
        assert mobius_witness(ex.build_r2(plan).atlas, "id", plan).passed

    def test_off_y_injective(self, plan):
        assert verify_off_y_injective(ex.build_r2(plan).atlas, plan).passed

    def test_trivialization_identity_chart(self, plan):
        at = make_atlas({"id": YChart(identity_chart(3), 2, 1)}, plan=plan)
        f = normal_trivialization(at, "id").frame(np.array([[0.0, 0.0, 0.3]]))
        npt.assert_allclose(f[0], np.eye(3)[:, :2], atol=1e-10)

    def test_trivialization_linear_chart(self, plan):
        a = np.array([[1.0, 0.5, 0.2], [0.0, 2.0, 0.1], [0.3, 0.0, 1.0]])
        at = make_atlas({"A": YChart(linear_chart(a), 2, 1)}, plan=plan)
        f = normal_trivialization(at, "A").frame(np.zeros((1, 3)))
        npt.assert_allclose(f[0], np.linalg.inv(a)[:, :2], atol=1e-9)

    def test_trivializations_match_h(self, plan):
        assert verify_trivializations(ex.build_r3_line(plan).atlas, plan).passed
