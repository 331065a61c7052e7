"""Deterministic reports: human-readable lines and byte-stable JSON lines.

The structured serialization is byte-identical for fixed scenario and seed,
except for the trailing timing record, which carries the wall time and is
excluded from the stability contract.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .setmodel import AxiomReport

TOOL_VERSION = "0.1.0"


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


@dataclass
class CheckRecord:
    name: str
    passed: bool
    residual: float = None
    witnesses: tuple = ()
    note: str = ""
    data: dict = None

    @classmethod
    def from_axiom(cls, report: AxiomReport, prefix: str = ""):
        return cls(
            name=prefix + report.axiom,
            passed=report.passed,
            residual=report.residual,
            witnesses=report.witnesses,
            note=report.note,
        )


@dataclass
class Report:
    scenario_id: str
    kind: str
    seed: int
    tolerances: dict
    records: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def add(self, record: CheckRecord):
        self.records.append(record)

    def extend_axioms(self, reports, prefix: str = ""):
        for r in reports:
            self.add(CheckRecord.from_axiom(r, prefix))

    @property
    def failed(self) -> list:
        return [r for r in self.records if not r.passed]

    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def structured_lines(self) -> list:
        def dump(obj):
            return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))

        lines = [dump({
            "record": "header",
            "scenario": self.scenario_id,
            "kind": self.kind,
            "seed": self.seed,
            "version": TOOL_VERSION,
            "tolerances": self.tolerances,
        })]
        for r in self.records:
            entry = {
                "record": "check",
                "name": r.name,
                "status": "pass" if r.passed else "fail",
            }
            if r.residual is not None:
                entry["residual"] = float(r.residual)
            if r.witnesses:
                entry["witnesses"] = [list(w) for w in r.witnesses]
            if r.note:
                entry["note"] = r.note
            if r.data:
                entry["data"] = r.data
            lines.append(dump(entry))
        lines.append(dump({
            "record": "summary",
            "checks": len(self.records),
            "failed": len(self.failed),
            "exit": self.exit_code(),
        }))
        lines.append(dump({"record": "timing", "wall_time_s": self.wall_time_s}))
        return lines

    def structured(self) -> str:
        return "\n".join(self.structured_lines()) + "\n"

    def human(self) -> str:
        lines = [f"scenario {self.scenario_id} ({self.kind})  seed={self.seed}"]
        for r in self.records:
            status = "PASS" if r.passed else "FAIL"
            parts = [f"  [{status}] {r.name}"]
            if r.residual is not None:
                parts.append(f"residual={r.residual:.3e}")
            if r.witnesses:
                shown = ", ".join("(" + ",".join(w) + ")" for w in r.witnesses[:4])
                more = "" if len(r.witnesses) <= 4 else f" (+{len(r.witnesses) - 4} more)"
                parts.append(f"witnesses: {shown}{more}")
            if r.note:
                parts.append(f"note: {r.note}")
            if r.data:
                parts.append("data: " + json.dumps(_jsonable(r.data), sort_keys=True))
            lines.append("  ".join(parts))
        lines.append(
            f"  {len(self.records)} checks: "
            f"{len(self.records) - len(self.failed)} pass, {len(self.failed)} fail")
        return "\n".join(lines) + "\n"
