"""Verification records: every check carries the number it was judged on."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass
class Check:
    name: str
    anchor: str
    tolerance: float
    defect: float
    passed: bool
    relation: str = "<="
    detail: dict = field(default_factory=dict)


@dataclass
class Report:
    title: str = ""
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, anchor: str, defect: float, tol: float, relation: str = "<=",
            **detail) -> Check:
        defect = float(defect)
        if relation == "<=":
            ok = defect <= tol
        elif relation == ">=":
            ok = defect >= tol
        elif relation == "==":
            ok = defect == tol
        else:
            raise ValueError(f"unknown relation {relation!r}")
        ok = ok and not math.isnan(defect)
        c = Check(name, anchor, float(tol), defect, bool(ok), relation, dict(detail))
        self.checks.append(c)
        return c

    def fail(self, name: str, anchor: str, defect: float, tol: float, reason: str) -> Check:
        c = Check(name, anchor, float(tol), float(defect), False, "<=", {"error": reason})
        self.checks.append(c)
        return c

    def extend(self, other: "Report") -> "Report":
        self.checks.extend(other.checks)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_defect(self) -> float:
        return max((c.defect for c in self.checks if c.relation == "<="), default=0.0)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {"title": self.title, "checks": [asdict(c) for c in self.checks]}

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(d.get("title", ""), [Check(**c) for c in d.get("checks", [])])

    def __str__(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=float)
