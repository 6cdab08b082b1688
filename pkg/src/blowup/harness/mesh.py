"""ASCII OBJ export of blowup chart patches and the exceptional circle.

The presentation sends a blowup point (l, x) to (x_1, x_2, theta / pi),
theta being the angle of the line measured in the branch of the chart the
patch comes from. It exists for real codimension 2 with at most one base
dimension, where the patches are drawn over the slice y = 0.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..chartcore import Array, FieldTag
from ..errors import DimensionUnsupported, IoFailure
from ..localblow import FAtlas, chart_inv_batch
from .registry import build_example, get_example


def _check_presentable(name: str, atlas: FAtlas) -> None:
    if atlas.field is not FieldTag.REAL or atlas.c != 2 or atlas.m > 1:
        dim = atlas.n_normal + atlas.m
        raise DimensionUnsupported(
            f"{name}: no 2- or 3-dimensional chart presentation (real dim {dim}, c = {atlas.c}, {atlas.field.value})"
        )


def _present(line: Array, x: Array) -> Array:
    theta = np.arctan2(line[..., 1], line[..., 0])
    return np.stack([x[..., 0], x[..., 1], theta / np.pi], axis=-1)


def patch_vertices(atlas: FAtlas, alpha: str, i: int, n: int, spread: float = 2.0) -> Array:
    """An n x n grid of blowup chart i over the normal coordinate and the line slope."""
    ch = atlas.charts[alpha]
    radius = 0.4 * float(np.min(np.minimum(-ch.chart.domain.lo[:2], ch.chart.domain.hi[:2])))
    j = 3 - i
    for _ in range(20):
        a = np.linspace(-radius, radius, n)
        b = np.linspace(-spread, spread, n)
        aa, bb = np.meshgrid(a, b, indexing="ij")
        w = np.zeros((n, n, 2 + atlas.m))
        w[..., i - 1] = aa
        w[..., j - 1] = bb
        line, x = chart_inv_batch(atlas, alpha, w.reshape(-1, 2 + atlas.m), i)
        if np.all(ch.contains(x)):
            line = line * np.sign(line[:, i - 1 : i])
            return _present(line, x)
        radius *= 0.5
    raise DimensionUnsupported(f"chart {alpha!r} has no usable patch")


def exceptional_vertices(k: int) -> Array:
    th = np.pi * (np.arange(k) + 0.5) / k - 0.5 * np.pi
    line = np.stack([np.cos(th), np.sin(th)], axis=-1)
    return _present(line, np.zeros((k, 2)))


def mesh_text(name: str, resolution: int) -> str:
    spec = get_example(name)
    atlas = build_example(name).atlas
    _check_presentable(name, atlas)
    n = max(int(resolution), 2)
    alpha = atlas.names[0]
    out = [f"# blowup chart patches for {spec.name}", f"# resolution {n}"]
    base = 0
    for i in (1, 2):
        verts = patch_vertices(atlas, alpha, i, n)
        out.append(f"o patch_{alpha}_{i}")
        out.extend(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}" for p in verts)
        for r in range(n - 1):
            for s in range(n - 1):
                a = base + r * n + s + 1
                out.append(f"f {a} {a + n} {a + n + 1} {a + 1}")
        base += n * n
    ring = exceptional_vertices(n)
    out.append("o exceptional")
    out.extend(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}" for p in ring)
    out.append("l " + " ".join(str(base + k + 1) for k in range(len(ring))))
    return "\n".join(out) + "\n"


def export_mesh(name: str, resolution: int, path) -> Path:
    text = mesh_text(name, resolution)
    path = Path(path)
    try:
        path.write_text(text, encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"cannot write mesh to {path}: {exc}") from exc
    return path
