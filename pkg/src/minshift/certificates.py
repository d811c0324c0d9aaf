"""Verification reports: a uniform pass/fail record with witnesses and bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Certificate:
    """Outcome of one invariant check.

    A failing certificate always carries at least one concrete witness.
    ``core`` records the radius the claim was verified on; the claim never
    extends past it.
    """

    name: str
    passed: bool
    core: int | None = None
    stage: int | None = None
    witnesses: list[Any] = field(default_factory=list)
    measured: dict[str, Any] = field(default_factory=dict)
    bounds: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.passed and not self.witnesses:
            raise ValueError(f"failing certificate {self.name!r} lacks a witness")

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            if isinstance(v, dict):
                return {str(k): enc(x) for k, x in v.items()}
            if isinstance(v, float) and v == float("inf"):
                return "inf"
            if isinstance(v, int) and abs(v) >= 2**53:
                return str(v)
            if isinstance(v, frozenset):
                return sorted(v)
            return v

        return {
            "name": self.name,
            "passed": self.passed,
            "core": self.core,
            "stage": self.stage,
            "witnesses": enc(self.witnesses),
            "measured": enc(self.measured),
            "bounds": enc(self.bounds),
            "notes": list(self.notes),
        }


def merge(name: str, parts: list[Certificate]) -> Certificate:
    """Combine sub-certificates into one; fails if any part fails."""
    failed = [c for c in parts if not c.passed]
    cert = Certificate(
        name=name,
        passed=not failed,
        witnesses=[w for c in failed for w in c.witnesses[:3]],
        measured={"checks": len(parts), "failures": len(failed)},
    )
    cert.notes.extend(f"{c.name}: fail" for c in failed[:10])
    return cert
