"""Verification reports: one record per residual check, JSON-serializable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["CheckReport", "report_set_to_json", "report_set_from_json"]


@dataclass
class CheckReport:
    """Outcome of one residual check."""

    name: str
    max_residual: float
    tolerance: float
    argmax: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self):
        return {
            "name": self.name,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
            "argmax": [float(a) for a in self.argmax],
            "extra": {k: _plain(v) for k, v in sorted(self.extra.items())},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(name=d["name"], max_residual=d["max_residual"],
                   tolerance=d["tolerance"], argmax=tuple(d["argmax"]),
                   extra=dict(d["extra"]))

    def __str__(self):
        state = "pass" if self.passed else "FAIL"
        return (f"[{state}] {self.name}: max residual "
                f"{self.max_residual:.3e} (tol {self.tolerance:.3e})")


def _plain(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def report_set_to_json(reports, **meta):
    """Serialize a list of CheckReports deterministically."""
    payload = {"meta": {k: _plain(v) for k, v in sorted(meta.items())},
               "checks": [r.to_dict() for r in reports],
               "all_passed": all(r.passed for r in reports)}
    return json.dumps(payload, indent=2, sort_keys=True)


def report_set_from_json(text):
    payload = json.loads(text)
    return [CheckReport.from_dict(d) for d in payload["checks"]], payload
