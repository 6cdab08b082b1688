"""The tautological line bundle over FP^{c-1} and its standard charts.

Chart indices are 1-based, matching the index set {1, ..., c}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chartcore import (
    TAU_ID,
    Array,
    FieldTag,
    ProjPoint,
    as_point,
    field_reals,
    field_values,
    normalize_values,
)
from .errors import ChartMiss, MembershipViolation


def line_residual(line_vals: Array, vec_vals: Array) -> Array:
    """Distance from vec to the line spanned by line_vals (last axis)."""
    u = line_vals / np.linalg.norm(line_vals, axis=-1, keepdims=True)
    t = np.sum(np.conj(u) * vec_vals, axis=-1, keepdims=True)
    return np.linalg.norm(vec_vals - t * u, axis=-1)


@dataclass(frozen=True, eq=False)
class TautPoint:
    """A point (l, v) of the tautological bundle: v lies on the line l."""

    line: ProjPoint
    vec: Array
    field: FieldTag = FieldTag.REAL

    def __post_init__(self):
        vec = as_point(self.vec)
        object.__setattr__(self, "vec", vec)
        if self.line.field is not self.field:
            raise ValueError("line and point have different fields")
        if vec.shape != self.line.homogeneous.shape:
            raise ValueError("vector and line have different sizes")
        vals = field_values(vec, self.field)
        res = float(line_residual(self.line.values, vals))
        if res >= TAU_ID * max(1.0, float(np.linalg.norm(vals))):
            raise MembershipViolation(f"vector is off the line (residual {res:.3e})")

    @property
    def c(self) -> int:
        return self.line.size

    @property
    def vec_values(self) -> Array:
        return field_values(self.vec, self.field)


def taut_point(line, vec, field: FieldTag = FieldTag.REAL) -> TautPoint:
    return TautPoint(ProjPoint(line, field), vec, field)


def chart_values(line_vals: Array, vec_vals: Array, i: int) -> Array:
    """Batched standard chart i on field values (no miss check)."""
    k = i - 1
    w = line_vals / line_vals[..., k : k + 1]
    w[..., k] = vec_vals[..., k]
    return w


def chart_inv_values(w: Array, i: int) -> tuple[Array, Array]:
    """Batched inverse of standard chart i: returns (line, vec) values."""
    k = i - 1
    line = np.array(w, copy=True)
    line[..., k] = 1.0
    return line, w[..., k : k + 1] * line


def taut_chart(p: TautPoint, i: int) -> Array:
    """Standard chart i: w_j = r_j / r_i for j != i and w_i = v_i."""
    if not 1 <= i <= p.c:
        raise ChartMiss(f"chart index {i} outside 1..{p.c}")
    r = normalize_values(p.line.values)
    if abs(r[i - 1]) <= TAU_ID:
        raise ChartMiss(f"line has vanishing coordinate {i}")
    return field_reals(chart_values(r, p.vec_values, i), p.field)


def taut_chart_inv(w: Array, i: int, c: int, field: FieldTag = FieldTag.REAL) -> TautPoint:
    """Inverse of chart i: line with 1 in slot i and w_j elsewhere, v = w_i * line."""
    wv = field_values(as_point(w), field)
    if wv.shape != (c,):
        raise ValueError(f"expected {c} field coordinates")
    line, vec = chart_inv_values(wv, i)
    return TautPoint(ProjPoint(field_reals(line, field), field), field_reals(vec, field), field)


def taut_transition(w: Array, i: int, j: int, c: int, field: FieldTag = FieldTag.REAL) -> Array:
    """Change of standard chart i -> j."""
    return taut_chart(taut_chart_inv(w, i, c, field), j)


def taut_project(p: TautPoint) -> Array:
    """The bundle point's vector v (projection to F^c)."""
    return p.vec
