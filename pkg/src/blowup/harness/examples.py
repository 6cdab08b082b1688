"""Concrete charts, TNIs and trivializations behind the built-in examples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..augblow import AugAtlas, make_aug_atlas
from ..chartcore import (
    Array,
    Box,
    ChartFn,
    FieldTag,
    SamplePlan,
    YChart,
    complex_matrix_to_real,
    identity_chart,
    linear_chart,
    newton_inverse,
    to_complex,
    to_real,
)
from ..equivalence import Trivialization, constant_trivialization, cut_up_charts
from ..globalblow import InnerProduct, TubularNbhd, standard_inner_product
from ..localblow import FAtlas, constant_h, make_atlas

POINT = Box(np.zeros(0), np.zeros(0))


@dataclass
class Built:
    """Everything an example's suite needs; ``atlas`` is always present."""

    atlas: FAtlas
    extra: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.extra[key]


def _stack2(a, b, c, d):
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def rotation(th: Array) -> Array:
    th = np.asarray(th, dtype=float)
    return _stack2(np.cos(th), -np.sin(th), np.sin(th), np.cos(th))


def _chart(fwd, inv, lo, hi, c, m, fld=FieldTag.REAL) -> YChart:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    return YChart(ChartFn(len(lo), len(lo), fwd, inv, Box(lo, hi)), c, m, fld)


# ---------------------------------------------------------------- real, at a point


def r2_charts() -> dict[str, YChart]:
    def nl(x):
        return np.stack([x[..., 0] + 0.3 * x[..., 1] ** 2, x[..., 1] + 0.2 * x[..., 1] ** 2], -1)

    def nl_inv(u):
        x2 = (-1.0 + np.sqrt(1.0 + 0.8 * u[..., 1])) / 0.4
        return np.stack([u[..., 0] - 0.3 * x2**2, x2], -1)

    rot = rotation(0.7) @ np.diag([1.5, 0.8])
    return {
        "id": YChart(identity_chart(2, 1.0), 2, 0),
        "lin": YChart(linear_chart(rot, 1.0), 2, 0),
        "nl": _chart(nl, nl_inv, [-0.8, -0.8], [0.8, 0.8], 2, 0),
    }


def build_r2(plan: SamplePlan) -> Built:
    return Built(make_atlas(r2_charts(), plan=plan))


def build_r3_origin(plan: SamplePlan) -> Built:
    def nl(x):
        return np.stack([x[..., 0] + 0.2 * x[..., 1] * x[..., 2], x[..., 1] + 0.3 * x[..., 2] ** 2, x[..., 2]], -1)

    def nl_inv(u):
        x3 = u[..., 2]
        x2 = u[..., 1] - 0.3 * x3**2
        return np.stack([u[..., 0] - 0.2 * x2 * x3, x2, x3], -1)

    a = np.array([[1.0, 0.4, 0.0], [0.0, 1.2, -0.3], [0.2, 0.0, 0.9]])
    charts = {
        "id": YChart(identity_chart(3, 1.0), 3, 0),
        "lin": YChart(linear_chart(a, 1.0), 3, 0),
        "nl": _chart(nl, nl_inv, [-0.8] * 3, [0.8] * 3, 3, 0),
    }
    return Built(make_atlas(charts, plan=plan))


def build_r5_origin(plan: SamplePlan) -> Built:
    a = np.eye(5) + 0.1 * np.diag(np.ones(4), 1)
    charts = {"id": YChart(identity_chart(5, 1.0), 5, 0), "lin": YChart(linear_chart(a, 1.0), 5, 0)}
    hs = {("lin", "id"): constant_h(a), ("id", "lin"): constant_h(np.linalg.inv(a))}
    return Built(make_atlas(charts, hs, plan))


# ---------------------------------------------------------------- real, along a line


A_ROT, B_ROT = 0.3, 0.2


def rotated_psi(lo=(-0.5, -0.5, -1.0), hi=(0.5, 0.5, 1.0)) -> TubularNbhd:
    """Psi(r, y) = (r1 + a r2^2, r2, y + b |r|^2) on a box."""

    def fwd(v):
        r1, r2, y = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([r1 + A_ROT * r2**2, r2, y + B_ROT * (r1**2 + r2**2)], -1)

    def inv(x):
        r2 = x[..., 1]
        r1 = x[..., 0] - A_ROT * r2**2
        return np.stack([r1, r2, x[..., 2] - B_ROT * (r1**2 + r2**2)], -1)

    return TubularNbhd(2, 1, ChartFn(3, 3, fwd, inv, Box(np.array(lo, float), np.array(hi, float))))


def rotated_trivs() -> list[Trivialization]:
    return [
        Trivialization("A", Box(np.array([-1.0]), np.array([0.3])), lambda y: rotation(0.3 * y[..., 0])),
        Trivialization("B", Box(np.array([-0.3]), np.array([1.0])), lambda y: rotation(-0.2 * y[..., 0] + 0.1)),
    ]


def build_r3_line(plan: SamplePlan) -> Built:
    t = rotated_psi()
    cut = cut_up_charts(t, rotated_trivs(), plan)
    charts = dict(cut.charts)
    charts["id"] = YChart(ChartFn(3, 3, lambda x: np.array(x, float), lambda x: np.array(x, float),
                                  Box(np.array([-0.6, -0.6, -1.2]), np.array([0.6, 0.6, 1.2]))), 2, 1)
    return Built(make_atlas(charts, cut.h_maps, plan))


def build_rotated_equivalence(plan: SamplePlan) -> Built:
    t = rotated_psi()
    return Built(cut_up_charts(t, rotated_trivs(), plan), {"tni": t, "trivs": rotated_trivs()})


def shear_g(v: Array) -> Array:
    """An R-equivalence: identity on Y with identity normal derivative."""
    r1, r2, y = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([r1 * (1 + 0.3 * r1), r2 + 0.2 * r1**2 + 0.4 * r2**2, y + 0.1 * r1 * r2], -1)


def shear_g_inv(u: Array) -> Array:
    r1 = (-1.0 + np.sqrt(1.0 + 1.2 * u[..., 0])) / 0.6
    q = u[..., 1] - 0.2 * r1**2
    r2 = (-1.0 + np.sqrt(1.0 + 1.6 * q)) / 0.8
    return np.stack([r1, r2, u[..., 2] - 0.1 * r1 * r2], -1)


def compose_tni(t: TubularNbhd, g, g_inv, W: Box) -> TubularNbhd:
    psi = ChartFn(t.psi.dim_in, t.total_dim, lambda v: t(g(v)), lambda x: g_inv(t.inv(x)), W)
    return TubularNbhd(t.c, t.m, psi, t.field, t.embed, t.embed_inv, t.normal_frame)


def build_real_global(plan: SamplePlan) -> Built:
    t = rotated_psi()
    t2 = compose_tni(t, shear_g, shear_g_inv, Box(np.array([-0.3, -0.3, -0.8]), np.array([0.3, 0.3, 0.8])))
    return Built(cut_up_charts(t, rotated_trivs(), plan), {"tni": t, "tni2": t2, "trivs": rotated_trivs()})


def build_merge(plan: SamplePlan) -> Built:
    t1 = rotated_psi(hi=(0.5, 0.5, 0.3))

    def f2(v):
        r1, r2, y = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([r1, r2 + 0.4 * r1**2, y - 0.1 * r1 * r2], -1)

    def i2(x):
        r1 = x[..., 0]
        r2 = x[..., 1] - 0.4 * r1**2
        return np.stack([r1, r2, x[..., 2] + 0.1 * r1 * r2], -1)

    t2 = TubularNbhd(2, 1, ChartFn(3, 3, f2, i2, Box(np.array([-0.4, -0.4, -0.3]), np.array([0.4, 0.4, 1.0]))))
    ident = lambda y: np.broadcast_to(np.eye(2), y.shape[:-1] + (2, 2)).copy()
    atlas = make_atlas(
        {**cut_up_charts(t1, [Trivialization("U1", t1.y_box, ident)], plan).charts,
         **cut_up_charts(t2, [Trivialization("U2", t2.y_box, ident)], plan).charts},
        plan=plan,
    )
    return Built(atlas, {"t1": t1, "t2": t2})


# ---------------------------------------------------------------- complex


C_MAT = np.array([[1.0, 0.5j], [0.3, 1.0 + 0.2j]])


def _cmv(a: Array, z: Array) -> Array:
    return np.einsum("...ij,...j->...i", a, z)


def _creal(a: Array) -> Array:
    return complex_matrix_to_real(a)


def c2_charts_and_h():
    """id, a complex-linear chart and (z1, z2 + z1^2), with explicit h-maps."""
    mi = np.linalg.inv(C_MAT)

    def nl(x):
        z = to_complex(x)
        return to_real(np.stack([z[..., 0], z[..., 1] + z[..., 0] ** 2], -1))

    def nl_inv(u):
        w = to_complex(u)
        return to_real(np.stack([w[..., 0], w[..., 1] - w[..., 0] ** 2], -1))

    lin = lambda x: to_real(_cmv(C_MAT, to_complex(x)))
    lin_inv = lambda u: to_real(_cmv(mi, to_complex(u)))
    charts = {
        "id": YChart(identity_chart(4, 1.0), 2, 0, FieldTag.COMPLEX),
        "lin": _chart(lin, lin_inv, [-1.0] * 4, [1.0] * 4, 2, 0, FieldTag.COMPLEX),
        "nl": _chart(nl, nl_inv, [-0.7] * 4, [0.7] * 4, 2, 0, FieldTag.COMPLEX),
    }
    # h from id coordinates and back, composed through id for every pair
    def nl_from_id(x):  # h_{nl,id}(x): nl(x) = h x
        z1 = to_complex(x)[..., 0]
        one = np.ones_like(z1)
        return _creal(_stack2(one, 0 * one, z1, one))

    def id_from_nl(u):  # h_{id,nl}(u)
        w1 = to_complex(u)[..., 0]
        one = np.ones_like(w1)
        return _creal(_stack2(one, 0 * one, -w1, one))

    to_id = {"id": lambda z: np.broadcast_to(np.eye(4), z.shape[:-1] + (4, 4)).copy(),
             "lin": lambda z: np.broadcast_to(_creal(mi), z.shape[:-1] + (4, 4)).copy(),
             "nl": id_from_nl}
    from_id = {"id": to_id["id"],
               "lin": lambda x: np.broadcast_to(_creal(C_MAT), x.shape[:-1] + (4, 4)).copy(),
               "nl": nl_from_id}
    hs = {}
    for a in charts:
        for b in charts:
            if a != b:
                hs[(a, b)] = lambda z, a=a, b=b: from_id[a](charts[b].inv(z)) @ to_id[b](z)
    return charts, hs


def build_c2(plan: SamplePlan) -> Built:
    charts, hs = c2_charts_and_h()
    return Built(make_atlas(charts, hs, plan))


def complex_psi() -> TubularNbhd:
    def fwd(v):
        z = to_complex(v)
        return to_real(np.stack([z[..., 0] + 0.3 * z[..., 1] ** 2, z[..., 1]], -1))

    def inv(x):
        z = to_complex(x)
        return to_real(np.stack([z[..., 0] - 0.3 * z[..., 1] ** 2, z[..., 1]], -1))

    return TubularNbhd(2, 0, ChartFn(4, 4, fwd, inv, Box.cube(4, 0.5)), FieldTag.COMPLEX)


def holo_g(v: Array) -> Array:
    z = to_complex(v)
    return to_real(np.stack([z[..., 0] + z[..., 0] * z[..., 1], z[..., 1] + 0.5 * z[..., 0] ** 2], -1))


def build_complex_global(plan: SamplePlan) -> Built:
    t = complex_psi()
    trivs = [constant_trivialization("I", np.eye(4), POINT), constant_trivialization("M", _creal(C_MAT), POINT)]
    t2 = compose_tni(t, holo_g, lambda x: newton_inverse(holo_g, t.inv(x), t.inv(x)), Box.cube(4, 0.25))
    return Built(cut_up_charts(t, trivs, plan), {"tni": t, "tni2": t2, "trivs": trivs})


# ---------------------------------------------------------------- augmented


def aug_point_charts():
    """Charts of R^2 at 0 whose h-maps are block lower triangular for c1 = 1."""

    def nl(x):
        return np.stack([x[..., 0] * (1 + 0.3 * x[..., 0]), 2 * x[..., 1] + 0.5 * x[..., 0] ** 2], -1)

    def nl_inv(u):
        x1 = (-1.0 + np.sqrt(1.0 + 1.2 * u[..., 0])) / 0.6
        return np.stack([x1, (u[..., 1] - 0.5 * x1**2) / 2], -1)

    lin = np.array([[2.0, 0.0], [1.0, 3.0]])
    return {
        "id": YChart(identity_chart(2, 1.0), 2, 0),
        "lin": YChart(linear_chart(lin, 1.0), 2, 0),
        "nl": _chart(nl, nl_inv, [-0.6, -0.6], [0.6, 0.6], 2, 0),
    }


def _aug_global_point():
    t = TubularNbhd(2, 0, ChartFn(2, 2, lambda v: np.array(v, float), lambda v: np.array(v, float), Box.cube(2, 20.0)))
    trivs = [constant_trivialization("I", np.eye(2), POINT),
             constant_trivialization("D", np.array([[2.0, 0.0], [0.0, -1.0]]), POINT)]
    return t, standard_inner_product(1), trivs


def build_aug_point(plan: SamplePlan) -> Built:
    base = make_atlas(aug_point_charts(), plan=plan)
    t, ip, trivs = _aug_global_point()
    return Built(base, {"aug": make_aug_atlas(base, 1), "tni": t, "ip": ip, "trivs": trivs})


def aug_line_charts():
    """R^3 along the y-axis with c1 = 1 and explicit h-maps."""
    g = lambda s: 2.0 + 0.5 * np.sin(s)

    def fa(x):
        r1, r2, s = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([r1 * g(s), 3 * r2 + r1**2 + 0.5 * r1 * s, s], -1)

    def fa_inv(u):
        s = u[..., 2]
        r1 = u[..., 0] / g(s)
        return np.stack([r1, (u[..., 1] - r1**2 - 0.5 * r1 * s) / 3, s], -1)

    def h_ab(z):
        r1, s = z[..., 0], z[..., 2]
        return _stack2(g(s), 0 * s, r1 + 0.5 * s, 3 + 0 * s)

    def h_ba(z):
        u1, s = z[..., 0], z[..., 2]
        return _stack2(1 / g(s), 0 * s, -(u1 / g(s) + 0.5 * s) / (3 * g(s)), 1 / 3 + 0 * s)

    charts = {
        "b": YChart(identity_chart(3, 1.0), 2, 1),
        "a": _chart(fa, fa_inv, [-6.0] * 3, [6.0] * 3, 2, 1),
    }
    return charts, {("a", "b"): h_ab, ("b", "a"): h_ba}


def aug_gram(y: Array) -> Array:
    y = np.asarray(y, dtype=float)
    return (1.5 + 0.3 * np.sin(y[..., :1]))[..., None]


def aug_line_psi(W: Optional[Box] = None) -> TubularNbhd:
    def fwd(v):
        r1, r2, y = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([r1, r2 + 0.3 * r1**2, y + 0.2 * r1 * r2], -1)

    def inv(x):
        r1 = x[..., 0]
        r2 = x[..., 1] - 0.3 * r1**2
        return np.stack([r1, r2, x[..., 2] - 0.2 * r1 * r2], -1)

    W = W or Box(np.array([-0.6, -0.6, -1.0]), np.array([0.6, 0.6, 1.0]))
    return TubularNbhd(2, 1, ChartFn(3, 3, fwd, inv, W))


def aug_line_trivs() -> list[Trivialization]:
    """Adapted for the Gram function aug_gram: block diagonal, |C w|^2 = <w, w>."""

    def a1(y):
        return _stack2(1.0 + 0 * y[..., 0], 0 * y[..., 0], 0 * y[..., 0], np.sqrt(aug_gram(y)[..., 0, 0]))

    def a2(y):
        return _stack2(2.0 + 0.5 * y[..., 0], 0 * y[..., 0], 0 * y[..., 0], -np.sqrt(aug_gram(y)[..., 0, 0]))

    return [Trivialization("P", Box(np.array([-1.0]), np.array([0.4])), a1),
            Trivialization("Q", Box(np.array([-0.4]), np.array([1.0])), a2)]


def build_aug_line(plan: SamplePlan) -> Built:
    charts, hs = aug_line_charts()
    base = make_atlas(charts, hs, plan)
    return Built(base, {"aug": make_aug_atlas(base, 1), "tni": aug_line_psi(), "ip": InnerProduct(aug_gram),
                        "trivs": aug_line_trivs()})


def build_aug_global(plan: SamplePlan) -> Built:
    t1 = aug_line_psi()
    t2 = compose_tni(t1, shear_g, shear_g_inv, Box(np.array([-0.3, -0.3, -0.8]), np.array([0.3, 0.3, 0.8])))
    ip = InnerProduct(aug_gram)
    trivs = aug_line_trivs()
    return Built(cut_up_charts(t1, trivs, plan), {"t1": t1, "t2": t2, "ip": ip, "trivs": trivs})
