"""Report assembly and table / CSV / JSON rendering.

JSON output is deterministic: fixed key order, floats at 12 significant
digits, no timings unless asked for.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import __version__, _backend
from ..criteria.outcome import OSCILLATORY, CriterionOutcome
from ..criteria.suite import Aggregate

SIG_DIGITS = 12


def clean(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def outcome_record(o: CriterionOutcome) -> dict:
    return {
        "criterion_id": o.criterion_id,
        "verdict": o.verdict,
        "value": o.value,
        "threshold": o.threshold,
        "error_bound": o.error_bound,
        "spread": o.spread,
        "margin": o.margin,
        "required_margin": o.required_margin,
        "applicability_notes": list(o.applicability_notes),
        "strategy_used": o.strategy_used,
        "details": o.details,
    }


@dataclass
class Report:
    config_hash: str
    config: dict
    outcomes: list
    aggregate: Aggregate
    notes: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    timings: bool = False

    def to_dict(self) -> dict:
        out = {
            "tool": {"name": "oscrit", "version": __version__},
            "config": {"hash": self.config_hash, "resolved": self.config},
            "notes": list(self.notes),
            "outcomes": [outcome_record(o) for o in self.outcomes],
            "aggregate": {"verdict": self.aggregate.verdict,
                          "oscillatory": self.aggregate.oscillatory,
                          "nonoscillatory": self.aggregate.nonoscillatory,
                          "notes": self.aggregate.notes},
        }
        if self.traces:
            out["traces"] = self.traces
        if self.checks:
            out["checks"] = self.checks
        if self.timings:
            out["timings"] = {"backend": _backend.BACKEND,
                              "seconds": {o.criterion_id: o.elapsed for o in self.outcomes}}
        return clean(out)

    def margin_violations(self) -> list:
        return [o.criterion_id for o in self.outcomes
                if o.verdict == OSCILLATORY and not o.check_margin_rule()]


def to_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


CSV_FIELDS = ["criterion_id", "verdict", "value", "threshold", "error_bound", "spread",
              "margin", "notes"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.{SIG_DIGITS}g}"
    return str(x)


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for o in report.outcomes:
        w.writerow([o.criterion_id, o.verdict, _fmt(o.value), _fmt(o.threshold),
                    _fmt(o.error_bound), _fmt(o.spread), _fmt(o.margin),
                    "; ".join(o.applicability_notes)])
    w.writerow(["aggregate", report.aggregate.verdict, "", "", "", "", "",
                "; ".join(report.aggregate.notes)])
    return buf.getvalue()


def to_table(report: Report) -> str:
    head = f"{'criterion':<12} {'verdict':<21} {'value':>14} {'threshold':>10} {'error':>9}  notes"
    lines = [f"config {report.config_hash[:12]}", head, "-" * len(head)]
    for o in report.outcomes:
        v = "" if o.value is None or math.isnan(o.value) else f"{o.value:.10g}"
        note = o.applicability_notes[0] if o.applicability_notes else ""
        lines.append(f"{o.criterion_id:<12} {o.verdict:<21} {v:>14} {o.threshold:>10.6g} "
                     f"{o.error_bound:>9.2e}  {note}")
    lines.append("-" * len(head))
    lines.append(f"aggregate: {report.aggregate.verdict}"
                 + (f" (via {', '.join(report.aggregate.oscillatory)})"
                    if report.aggregate.oscillatory else ""))
    for n in report.notes + report.aggregate.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    return to_table(report)


def write(text: str, path: Optional[str]) -> None:
    if path is None:
        import sys
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
