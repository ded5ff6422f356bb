"""Check records and report serialization (JSON reports, gnuplot-style CSV)."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    check: str
    params: dict
    measured: float | None
    bound: float | None = None
    passed: bool | None = None
    notes: str = ""

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
            "notes": self.notes,
        }


@dataclass
class CheckReport:
    """One record per verified inequality plus summary counts."""

    name: str
    records: list[CheckRecord] = field(default_factory=list)

    def add(self, check, params, measured, bound=None, passed=None, notes=""):
        rec = CheckRecord(check, params,
                          None if measured is None else float(measured),
                          None if bound is None else float(bound),
                          passed, notes)
        self.records.append(rec)
        return rec

    @property
    def n_pass(self) -> int:
        return sum(1 for r in self.records if r.passed is True)

    @property
    def n_fail(self) -> int:
        return sum(1 for r in self.records if r.passed is False)

    @property
    def all_passed(self) -> bool:
        return self.n_fail == 0

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.passed is False]

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "summary": {"pass": self.n_pass, "fail": self.n_fail,
                        "total": len(self.records)},
            "records": [r.to_json_dict() for r in self.records],
        }


def dump_json(obj, path: str) -> None:
    """Deterministic JSON dump: sorted keys, no timestamps."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_csv(columns: dict[str, list], path: str) -> None:
    """Whitespace-separated columns with a '#' header line (gnuplot friendly)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    names = list(columns)
    rows = zip(*[columns[c] for c in names]) if names else []
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
