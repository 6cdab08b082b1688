"""Line-oriented JSON reports: one record per check, then a summary line."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..errors import IoFailure
from .registry import VerifyReport


def sig6(x: float) -> Any:
    """Six significant digits; non-finite values become strings."""
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(f"{x:.6g}")


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return sig6(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return str(obj)


def report_records(rep: VerifyReport) -> list[dict[str, Any]]:
    """Wall time is left out so re-runs with one seed serialize identically."""
    rows = []
    for c in rep.checks:
        rows.append({
            "example": rep.example,
            "seed": rep.seed,
            "check": c.name,
            "value": sig6(c.value),
            "tol": sig6(c.tol),
            "mode": c.mode,
            "samples": int(c.samples),
            "pass": bool(c.passed),
            "detail": _clean(c.detail),
        })
    rows.append({
        "example": rep.example,
        "seed": rep.seed,
        "summary": True,
        "checks": len(rep.checks),
        "failed": rep.failures(),
        "pass": bool(rep.passed),
    })
    return rows


def to_jsonl(reports: Iterable[VerifyReport]) -> str:
    lines = []
    for rep in reports:
        for row in report_records(rep):
            lines.append(json.dumps(row, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def write_report(reports: Iterable[VerifyReport], path) -> Path:
    path = Path(path)
    text = to_jsonl(reports)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
    return path
