"""Check records and reports produced by the verification sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable


@dataclass(frozen=True)
class Check:
    """One verified quantity.

    ``mode="max"`` means the value is a worst-case residual that must stay
    below ``tol``; ``mode="min"`` means it is a lower bound (e.g. a smallest
    singular value) that must stay above ``tol``.
    """

    name: str
    value: float
    tol: float
    samples: int
    mode: str = "max"
    detail: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.value != self.value:  # NaN never passes
            return False
        if self.mode == "max":
            return self.value < self.tol
        if self.mode == "min":
            return self.value > self.tol
        if self.mode == "flag":
            return bool(self.value)
        raise ValueError(f"unknown check mode {self.mode!r}")


def flag(name: str, ok: bool, samples: int = 1, **detail: Any) -> Check:
    """A boolean check: passes iff ``ok``."""
    return Check(name, 1.0 if ok else 0.0, 0.5, samples, mode="flag", detail=detail)


@dataclass(frozen=True)
class Report:
    title: str
    checks: tuple[Check, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def prefixed(self, prefix: str) -> tuple[Check, ...]:
        return tuple(
            Check(f"{prefix}{c.name}", c.value, c.tol, c.samples, c.mode, c.detail)
            for c in self.checks
        )


def combine(title: str, parts: Iterable[Report | Check], **meta: Any) -> Report:
    out: list[Check] = []
    for p in parts:
        if isinstance(p, Report):
            out.extend(p.prefixed(f"{p.title}."))
        else:
            out.append(p)
    return Report(title, tuple(out), meta)
