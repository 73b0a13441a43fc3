"""Command-line entry point: ``oscrit check|simulate|reproduce|scan``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 reproduction mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import __version__, _backend
from ..criteria.suite import aggregate, run_all
from ..errors import (BreakpointDensityExceeded, CacheMiss, EvaluationFailed,
                      InsufficientSamples, OscritError, OutOfDomain, SchemaError,
                      SemanticError, StepTooLarge, ToleranceNotMet)
from ..simulator import History, simulate, write_series
from . import reproduce as repro
from . import scan as scanmod
from .config import bundled_config_path, parse_config
from .report import Report, clean, render, write

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3

CONFIG_ERRORS = (SchemaError, SemanticError, StepTooLarge, OutOfDomain, FileNotFoundError)
NUMERIC_ERRORS = (ToleranceNotMet, InsufficientSamples, EvaluationFailed, CacheMiss,
                  BreakpointDensityExceeded)


class Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _read_document(path: str) -> dict:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from None


def _overrides(doc: dict, args) -> dict:
    ev = dict(doc.get("evaluation", {}))
    for key, attr in (("horizon", "horizon"), ("tol", "tol"), ("sampling", "sampling"),
                      ("epsilon", "epsilon")):
        val = getattr(args, attr, None)
        if val is not None:
            ev[key] = val
    if getattr(args, "eps_sweep", False):
        ev["eps_sweep"] = True
    if ev:
        doc = dict(doc, evaluation=ev)
    if getattr(args, "criteria", None) is not None:
        doc = dict(doc, criteria=args.criteria if args.criteria == "all"
                   else [c.strip() for c in args.criteria.split(",") if c.strip()])
    return doc


def cmd_check(args) -> int:
    rc = parse_config(_overrides(_read_document(args.config), args))
    outs = run_all(rc.problem, rc.settings, rc.criteria)
    rep = Report(rc.hash, rc.document, outs, aggregate(outs), notes=rc.diagnostics,
                 timings=args.timings)
    bad = rep.margin_violations()
    if bad:
        print(f"internal error: margin rule violated by {', '.join(bad)}", file=sys.stderr)
        return EXIT_NUMERIC
    fmt = args.format or rc.output_format
    write(render(rep, fmt), args.out or rc.output_path)
    return EXIT_OK


def _simulation_record(rc, tr, series_path) -> dict:
    return {"tool": {"name": "oscrit", "version": __version__},
            "config": {"hash": rc.hash, "resolved": rc.document},
            "trace": tr.summary(),
            "zero_crossings": list(tr.zero_crossings),
            "series": str(series_path) if series_path else None}


def cmd_simulate(args) -> int:
    rc = parse_config(_read_document(args.config))
    try:
        hist = History.parse(args.history)
    except (ValueError, OSError) as exc:
        raise SchemaError(str(exc), "--history") from None
    tr = simulate(rc.problem, hist, args.T, args.step)
    if args.out:
        write_series(tr, args.out)
    rec = _simulation_record(rc, tr, args.out)
    if args.format == "json":
        text = json.dumps(clean(rec), indent=2, allow_nan=False) + "\n"
    else:
        s = tr.summary()
        lines = [f"config {rc.hash[:12]}",
                 f"history {s['history']}, step {s['step']:.6g}, {s['steps']} steps "
                 f"on [{s['t0']:g}, {s['horizon']:g}]",
                 f"zero crossings: {s['zero_crossings']}"
                 + (f" (first {s['first_zero']:.10g}, last {s['last_zero']:.10g})"
                    if s["zero_crossings"] else ""),
                 f"classification: {s['classification']}"]
        lines += [f"note: {n}" for n in s["notes"]]
        if args.out:
            lines.append(f"series written to {args.out}")
        text = "\n".join(lines) + "\n"
    write(text, args.report)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.id not in repro.EXAMPLES:
        raise SchemaError(f"unknown example {args.id!r}; known: {', '.join(repro.EXAMPLES)}")
    rep, checks = repro.reproduce(args.id, timings=args.timings)
    if args.format == "json":
        write(render(rep, "json"), args.out)
    else:
        text = repro.diff(args.id, checks)
        text += "".join(f"note: {n}\n" for n in rep.notes)
        text += f"aggregate: {rep.aggregate.verdict}\n"
        write(text, args.out)
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"reproduction mismatch for example {args.id}:", file=sys.stderr)
        for c in failed:
            print("  " + c.line(), file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_scan(args) -> int:
    doc = _read_document(args.config)
    try:
        res = scanmod.scan(doc, args.param, args.start, args.stop, args.step, args.criterion,
                           jobs=args.jobs, baseline=args.baseline)
    except ValueError as exc:
        if isinstance(exc, OscritError):
            raise
        raise SchemaError(str(exc)) from None
    table = scanmod.to_csv(res)
    summary = scanmod.summary(res)
    if args.out:
        write(table, args.out)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(table)
        sys.stderr.write(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = Parser(prog="oscrit", description="Oscillation criteria for linear delay "
                "differential equations with several retarded arguments.")
    ap.add_argument("--version", action="version",
                    version=f"oscrit {__version__} ({_backend.BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=Parser)

    c = sub.add_parser("check", help="run the criteria suite on a configuration")
    c.add_argument("--config", required=True, help="file path or a bundled example id")
    c.add_argument("--criteria", help="comma list of criterion ids, or 'all'")
    c.add_argument("--horizon", type=float)
    c.add_argument("--tol", type=float)
    c.add_argument("--sampling", choices=["supplement", "grid", "candidates",
                                          "periodic_exact"])
    c.add_argument("--epsilon", type=float)
    c.add_argument("--eps-sweep", action="store_true")
    c.add_argument("--format", choices=["table", "csv", "json"])
    c.add_argument("--out")
    c.add_argument("--timings", action="store_true",
                   help="include backend and per-criterion wall time")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="method-of-steps solution and sign changes")
    s.add_argument("--config", required=True)
    s.add_argument("--history", required=True, help="const:C | exp:L[,C] | file:PATH")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--step", type=float)
    s.add_argument("--out", help="CSV series (t,x)")
    s.add_argument("--format", choices=["table", "json"], default="table")
    s.add_argument("--report", help="write the summary here instead of stdout")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="check a worked example against its constants")
    r.add_argument("id", help="one of " + ", ".join(repro.EXAMPLES))
    r.add_argument("--format", choices=["table", "json"], default="table")
    r.add_argument("--out")
    r.add_argument("--timings", action="store_true")
    r.set_defaults(func=cmd_reproduce)

    g = sub.add_parser("scan", help="sweep one scalar parameter")
    g.add_argument("--config", required=True, help="file path or a bundled example id")
    g.add_argument("--param", required=True, help="dotted path, e.g. params.p")
    g.add_argument("--from", dest="start", type=float, required=True)
    g.add_argument("--to", dest="stop", type=float, required=True)
    g.add_argument("--step", type=float, required=True)
    g.add_argument("--criterion", required=True)
    g.add_argument("--baseline", help="report where --criterion fires and this does not")
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--out")
    g.set_defaults(func=cmd_scan)
    return ap


def _resolve_config(args):
    cfg = getattr(args, "config", None)
    if cfg and not Path(cfg).exists() and cfg in repro.EXAMPLES:
        args.config = str(bundled_config_path(cfg))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _resolve_config(args)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
