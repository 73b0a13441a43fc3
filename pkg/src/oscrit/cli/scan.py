"""Parameter sweeps over one scalar of a configuration document."""
from __future__ import annotations

import copy
import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from ..criteria.outcome import OSCILLATORY
from ..criteria.suite import aggregate, resolve, run_all
from ..errors import OscritError, SchemaError
from .config import parse_config, set_path

FAILED = "failed"


@dataclass
class ScanRow:
    parameter: float
    value: float
    error_bound: float
    verdict: str
    note: str = ""
    baseline_verdict: Optional[str] = None


@dataclass
class ScanResult:
    path: str
    criterion: str
    rows: list
    baseline: Optional[str] = None
    notes: list = field(default_factory=list)

    def oscillatory(self, rows=None) -> list:
        return [r.parameter for r in (rows or self.rows) if r.verdict == OSCILLATORY]

    @property
    def first(self) -> Optional[float]:
        osc = self.oscillatory()
        return osc[0] if osc else None

    @property
    def last(self) -> Optional[float]:
        osc = self.oscillatory()
        return osc[-1] if osc else None

    def ranges(self) -> list:
        """Maximal runs of consecutive Oscillatory rows as ``(first, last)``."""
        return _runs(self.rows, lambda r: r.verdict == OSCILLATORY)

    def improvement_ranges(self) -> list:
        """Runs where the criterion fires and the baseline does not."""
        if self.baseline is None:
            return []
        return _runs(self.rows, lambda r: r.verdict == OSCILLATORY
                     and r.baseline_verdict != OSCILLATORY)

    def failed(self) -> list:
        return [r for r in self.rows if r.verdict == FAILED]


def _runs(rows, pred) -> list:
    out, start, prev = [], None, None
    for r in rows:
        if pred(r):
            if start is None:
                start = r.parameter
            prev = r.parameter
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out


def grid(a: float, b: float, step: float) -> list:
    """``a, a+step, ...`` up to ``b`` inclusive, rounded against drift."""
    if step <= 0:
        raise ValueError("step must be positive")
    if b < a:
        raise ValueError("--to must not be below --from")
    n = int(math.floor((b - a) / step + 1e-9))
    digits = max(0, -int(math.floor(math.log10(step))) + 3)
    return [round(a + k * step, digits) for k in range(n + 1)]


def _evaluate(doc, path, value, criterion):
    rc = parse_config(set_path(copy.deepcopy(doc), path, value))
    outs = run_all(rc.problem, rc.settings, [criterion])
    if len(outs) == 1:
        o = outs[0]
        return o.value, o.error_bound, o.verdict, "; ".join(o.applicability_notes[:1])
    # per-term expansion: the row is the aggregate of the sub-equation outcomes
    agg = aggregate(outs)
    best = max(outs, key=lambda o: -math.inf if math.isnan(o.value) else o.value)
    via = ", ".join(agg.oscillatory)
    return best.value, best.error_bound, agg.verdict, f"via {via}" if via else ""


def scan_point(doc, path: str, value: float, criterion: str,
               baseline: Optional[str] = None) -> ScanRow:
    """One grid point; errors mark the row failed instead of raising."""
    try:
        v, err, verdict, note = _evaluate(doc, path, value, criterion)
        row = ScanRow(value, v, err, verdict, note)
        if baseline is not None:
            row.baseline_verdict = _evaluate(doc, path, value, baseline)[2]
        return row
    except (OscritError, ValueError, ArithmeticError) as exc:
        return ScanRow(value, math.nan, math.nan, FAILED, f"{type(exc).__name__}: {exc}")


def scan(doc: dict, path: str, a: float, b: float, step: float, criterion: str,
         jobs: int = 1, baseline: Optional[str] = None) -> ScanResult:
    """Run ``criterion`` at every grid point of ``path`` over ``[a, b]``.

    Parameters
    ----------
    doc : dict
        Configuration document (not modified).
    path : str
        Dotted path of a scalar, e.g. ``params.p`` or ``terms.0.coefficient``.
    jobs : int
        Worker processes; rows are independent.
    baseline : str, optional
        Second criterion; rows where only ``criterion`` fires form the
        improvement ranges.
    """
    # validate the path and criterion once up front so a typo fails fast
    parse_config(set_path(copy.deepcopy(doc), path, a))
    for cid in (criterion, baseline):
        try:
            resolve([cid] if cid else [])
        except KeyError as exc:
            raise SchemaError(str(exc.args[0]), "criterion") from exc
    values = grid(a, b, step)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(scan_point, [doc] * len(values), [path] * len(values),
                                 values, [criterion] * len(values),
                                 [baseline] * len(values)))
    else:
        rows = [scan_point(doc, path, v, criterion, baseline) for v in values]
    return ScanResult(path, criterion, rows, baseline)


def _f(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.12g}"


def to_csv(res: ScanResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["parameter", "value", "error_bound", "verdict", "note"]
    if res.baseline:
        head.insert(4, f"baseline_{res.baseline}")
    w.writerow(head)
    for r in res.rows:
        line = [_f(r.parameter), _f(r.value), _f(r.error_bound), r.verdict, r.note]
        if res.baseline:
            line.insert(4, r.baseline_verdict or "")
        w.writerow(line)
    return buf.getvalue()


def summary(res: ScanResult) -> str:
    lines = [f"scan {res.path} criterion {res.criterion}: {len(res.rows)} points"]
    if res.first is None:
        lines.append("no oscillatory grid point")
    else:
        lines.append(f"first oscillatory {res.first:.12g}, last oscillatory {res.last:.12g}")
        lines.append("oscillatory ranges: "
                     + ", ".join(f"[{lo:.12g}, {hi:.12g}]" for lo, hi in res.ranges()))
    if res.baseline:
        imp = res.improvement_ranges()
        lines.append(f"where {res.criterion} fires and {res.baseline} does not: "
                     + (", ".join(f"[{lo:.12g}, {hi:.12g}]" for lo, hi in imp) or "none"))
    if res.failed():
        lines.append(f"{len(res.failed())} rows failed")
    return "\n".join(lines) + "\n"
