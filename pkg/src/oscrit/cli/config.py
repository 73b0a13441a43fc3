"""JSON run configurations: schema, templates and resolution to a Problem.

A document either lists ``terms`` explicitly or names a ``template`` with
``params``.  Piecewise functions use the form understood by
:meth:`PiecewiseFn.from_spec`; delays are delay amounts ``d(t) = t - tau(t)``
and sigma overrides are lags ``t - sigma(t)``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import jsonschema

from ..criteria.context import SAMPLING_MODES, Settings
from ..criteria.suite import resolve
from ..errors import PiecewiseError, SchemaError, SemanticError
from ..funcmodel import (Candidates, DelayArg, Envelope, PiecewiseFn, Problem, Term, as_fraction,
                         validate_problem)

NUMBER = {"oneOf": [{"type": "number"},
                    {"type": "string", "pattern": r"^\s*-?\d+(\.\d+)?(\s*/\s*\d+)?\s*$"}]}
PIECE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["from", "poly"],
    "properties": {
        "from": NUMBER,
        "to": {"oneOf": [NUMBER, {"type": "null"}]},
        "poly": {"type": "array", "items": NUMBER, "minItems": 1, "maxItems": 4},
    },
}
FUNCTION = {"oneOf": [NUMBER, {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "pieces": {"type": "array", "items": PIECE},
        "period": NUMBER,
        "pattern_start": NUMBER,
        "pattern": {"type": "array", "items": PIECE, "minItems": 1},
    },
}]}
EVALUATION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "horizon": {"type": ["number", "null"]},
        "sampling": {"enum": list(SAMPLING_MODES)},
        "samples_per_period": {"type": "integer", "minimum": 10},
        "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "grid_points": {"type": "integer", "minimum": 100},
        "refine": {"type": "boolean"},
        "inner_delay": {"enum": ["exact", "minorant"]},
        "epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "eps_sweep": {"type": "boolean"},
        "ls_symmetric": {"type": "boolean"},
        "gks_cap": {"type": "number", "exclusiveMinimum": 0},
        "minorant": {"oneOf": [FUNCTION, {"type": "null"}]},
        "minorant_const": {"type": ["number", "null"], "minimum": 0},
    },
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "t0": NUMBER,
        "terms": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "additionalProperties": False,
                      "required": ["coefficient", "delay"],
                      "properties": {"coefficient": FUNCTION, "delay": FUNCTION}},
        },
        "template": {"type": "string"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "candidates": {"oneOf": [{"type": "null"}, {
            "type": "object", "additionalProperties": False, "required": ["step", "offset"],
            "properties": {"step": {"type": "number", "exclusiveMinimum": 0},
                           "offset": {"type": "number"},
                           "n_from": {"type": "integer"}, "n_to": {"type": "integer"}},
        }]},
        "sigma_overrides": {"oneOf": [{"type": "null"},
                                      {"type": "array",
                                       "items": {"oneOf": [FUNCTION, {"type": "null"}]}}]},
        "evaluation": EVALUATION,
        "criteria": {"oneOf": [{"const": "all"},
                               {"type": "array", "items": {"type": "string"}, "minItems": 1}]},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"format": {"enum": ["table", "csv", "json"]},
                                  "path": {"type": ["string", "null"]}}},
        "meta": {"type": "object"},
    },
}

EVALUATION_DEFAULTS = {
    "tol": 1e-8, "horizon": None, "sampling": "supplement", "samples_per_period": 400,
    "tail_fraction": 0.3, "grid_points": 2000, "refine": True, "inner_delay": "exact",
    "epsilon": None, "eps_sweep": False, "ls_symmetric": False, "gks_cap": 1e3,
    "minorant": None, "minorant_const": None,
}
OUTPUT_DEFAULTS = {"format": "table", "path": None}


# ----------------------------------------------------------------------
# templates: the worked examples, parametrized


def _affine(lo, hi, value_lo, slope):
    """Phase piece with value ``value_lo`` at ``lo`` (absolute phase poly)."""
    lo, hi = as_fraction(lo), as_fraction(hi)
    c0 = as_fraction(value_lo) - as_fraction(slope) * lo
    return {"from": _num(lo), "to": _num(hi), "poly": [_num(c0), _num(as_fraction(slope))]}


def _num(x: Fraction):
    if x.denominator == 1:
        return int(x)
    f = float(x)
    return f if Fraction(repr(f)) == x else f"{x.numerator}/{x.denominator}"


# delay amounts of the two zig-zag arguments on one period [0, 3)
_ZIGZAG_1 = [{"from": 0, "to": 1, "poly": [1]},
             {"from": 1, "to": 2, "poly": [-3, 4]},
             {"from": 2, "to": 3, "poly": [13, -4]}]
_ZIGZAG_2 = [{"from": 0, "to": 1, "poly": [2]},
             {"from": 1, "to": 2, "poly": [0, 2]},
             {"from": 2, "to": 3, "poly": [8, -2]}]
_LAG_1 = [{"from": 0, "to": 1, "poly": [1]},
          {"from": 1, "to": "13/5", "poly": [0, 1]},
          {"from": "13/5", "to": 3, "poly": [13, -4]}]
_LAG_2 = [{"from": 0, "to": 1, "poly": [2]},
          {"from": 1, "to": "7/3", "poly": [1, 1]},
          {"from": "7/3", "to": 3, "poly": [8, -2]}]


def _periodic(pieces, period=3, start=0):
    return {"period": period, "pattern_start": start, "pattern": pieces}


def example_4_1(alpha=0.67, delta=0.5, a1=1.0, epsilon=0.05):
    """Single term, ``tau = t - 1``, trapezoidal coefficient of period ``3 + 2*delta``."""
    lo = 1 / math.e
    al, dl, a1f = as_fraction(alpha), as_fraction(delta), as_fraction(a1)
    L = 3 + 2 * dl
    inv_e = as_fraction(lo)
    rise = (al - inv_e) / dl
    pattern = [
        {"from": 0, "to": 1, "poly": [lo]},
        _affine(1, 1 + dl, inv_e, rise),
        {"from": _num(1 + dl), "to": _num(L - dl), "poly": [_num(al)]},
        _affine(L - dl, L, al, -rise),
    ]
    coefficient = {"pieces": [{"from": 0, "to": _num(a1f), "poly": [lo]}],
                   "period": _num(L), "pattern_start": _num(a1f), "pattern": pattern}
    return {"terms": [{"coefficient": coefficient, "delay": 1}],
            "evaluation": {"epsilon": epsilon}}


def check_example_4_1(params, epsilon):
    """``ln(1+e)/(e-eps) < alpha < ln 2`` with the configured ``eps``."""
    alpha = params["alpha"]
    lo = math.log(1 + math.e) / (math.e - epsilon)
    if not lo < alpha < math.log(2):
        return [f"params.alpha: {alpha} violates ln(1+e)/(e-eps) = {lo:.6f} < alpha < "
                f"ln 2 = {math.log(2):.6f}"]
    if params["delta"] <= 0 or params["a1"] <= 0:
        return ["params: a1 and delta must be positive"]
    return []


def example_4_2(p=0.33):
    """``x' + p x(tau(t)) = 0`` with the zig-zag argument of period 3."""
    return {"terms": [{"coefficient": p, "delay": _periodic(_ZIGZAG_1)}],
            "candidates": {"step": 3, "offset": 3, "n_from": 10, "n_to": 29},
            "sigma_overrides": [_periodic(_LAG_1)]}


def example_4_3(p=0.9, delta1=0.6, delta2=0.6, period=2.0, start=1.0):
    """Two constant delays and a pulsed coefficient ``p`` on ``[t_k, t_k + max delta]``."""
    width = max(as_fraction(delta1), as_fraction(delta2))
    P, s = as_fraction(period), as_fraction(start)
    pulse = {"pieces": [{"from": 0, "to": _num(s), "poly": [0]}] if s > 0 else [],
             "period": _num(P), "pattern_start": _num(s),
             "pattern": [{"from": 0, "to": _num(width), "poly": [p]},
                         {"from": _num(width), "to": _num(P), "poly": [0]}]}
    return {"terms": [{"coefficient": pulse, "delay": delta1},
                      {"coefficient": pulse, "delay": delta2}],
            "evaluation": {"minorant_const": p}}


def check_example_4_3(params, epsilon):
    width = max(params["delta1"], params["delta2"])
    if not 2 * width < params["period"]:
        return ["params: pulses need t_k + 2*max(delta) < t_(k+1)"]
    return []


def example_4_4(p1=0.1, p2=0.158):
    """Two zig-zag arguments of period 3 with constant coefficients."""
    return {"terms": [{"coefficient": p1, "delay": _periodic(_ZIGZAG_1)},
                      {"coefficient": p2, "delay": _periodic(_ZIGZAG_2)}],
            "candidates": {"step": 3, "offset": 3, "n_from": 10, "n_to": 29},
            "sigma_overrides": [_periodic(_LAG_1), _periodic(_LAG_2)]}


TEMPLATES = {
    "example_4_1": (example_4_1, {"alpha": 0.67, "delta": 0.5, "a1": 1.0, "epsilon": 0.05},
                    check_example_4_1),
    "example_4_2": (example_4_2, {"p": 0.33}, None),
    "example_4_3": (example_4_3, {"p": 0.9, "delta1": 0.6, "delta2": 0.6, "period": 2.0,
                                  "start": 1.0}, check_example_4_3),
    "example_4_4": (example_4_4, {"p1": 0.1, "p2": 0.158}, None),
}


# ----------------------------------------------------------------------
# parsing


@dataclass
class RunConfig:
    """A fully resolved configuration.

    ``document`` is the resolved JSON form (defaults applied, template kept
    as template plus params); equality compares documents.
    """

    document: dict
    problem: Problem = field(compare=False, repr=False)
    settings: Settings = field(compare=False, repr=False)
    criteria: list = field(compare=False)
    output_format: str = "table"
    output_path: Optional[str] = None
    diagnostics: list = field(default_factory=list, compare=False)

    @property
    def hash(self) -> str:
        return config_hash(self.document)

    def to_document(self) -> dict:
        return copy.deepcopy(self.document)

    def with_param(self, path: str, value) -> "RunConfig":
        doc = set_path(self.to_document(), path, value)
        return parse_config(doc)


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    path = ".".join(str(p) for p in err.absolute_path)
    # oneOf failures are opaque; report the most specific sub-error
    best = jsonschema.exceptions.best_match([err] + list(err.context or []))
    if best is not None and best is not err:
        sub = ".".join(str(p) for p in best.absolute_path) or path
        return SchemaError(best.message, sub)
    return SchemaError(err.message, path)


def _validate_schema(doc):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise _schema_error(errors[0])


def _function(spec, path, t0, nonneg=False):
    try:
        return PiecewiseFn.from_spec(spec, t0=t0, nonneg=nonneg, name=path)
    except PiecewiseError as exc:
        raise SchemaError(str(exc).split(": ", 1)[-1], path) from exc
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise SchemaError(str(exc), path) from exc


def _merge_defaults(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    if "template" in out and "terms" in out:
        raise SchemaError("give either terms or template, not both", "template")
    if "template" not in out and "terms" not in out:
        raise SchemaError("terms (or a template) is required", "terms")
    t_eval = {}
    if "template" in out:
        name = out["template"]
        if name not in TEMPLATES:
            raise SchemaError(f"unknown template {name!r}; known: {', '.join(TEMPLATES)}",
                              "template")
        _, defaults, _ = TEMPLATES[name]
        params = dict(defaults)
        for k, v in out.get("params", {}).items():
            if k not in defaults:
                raise SchemaError(f"unknown parameter {k!r} for {name}", f"params.{k}")
            params[k] = v
        out["params"] = params
    elif "params" in out:
        raise SchemaError("params only apply to a template", "params")
    out.setdefault("t0", 0)
    out.setdefault("candidates", None)
    out.setdefault("sigma_overrides", None)
    if "template" in out:
        built = TEMPLATES[out["template"]][0](**out["params"])
        t_eval = built.get("evaluation", {})
    ev = dict(EVALUATION_DEFAULTS)
    ev.update(t_eval)
    ev.update(out.get("evaluation", {}))
    out["evaluation"] = ev
    out.setdefault("criteria", "all")
    outp = dict(OUTPUT_DEFAULTS)
    outp.update(out.get("output", {}))
    out["output"] = outp
    out.setdefault("meta", {})
    return out


def expand(doc: dict) -> dict:
    """Problem-level fields (terms, candidates, overrides) after template expansion."""
    if "template" not in doc:
        return {k: doc[k] for k in ("terms", "candidates", "sigma_overrides")}
    built = TEMPLATES[doc["template"]][0](**doc["params"])
    cand = doc["candidates"] if doc.get("candidates") is not None else built.get("candidates")
    ov = doc["sigma_overrides"] if doc.get("sigma_overrides") is not None \
        else built.get("sigma_overrides")
    return {"terms": built["terms"], "candidates": cand, "sigma_overrides": ov}


def parse_config(document, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate and resolve a configuration document.

    Raises
    ------
    SchemaError
        Malformed document, with the dotted location of the problem.
    SemanticError
        Well-formed but violating the standing hypotheses.
    """
    if not isinstance(document, dict):
        raise SchemaError("configuration must be a JSON object")
    _validate_schema(document)
    doc = _merge_defaults(document)
    _validate_schema(doc)
    t0 = as_fraction(doc["t0"])
    prob = expand(doc)
    terms = []
    for i, tm in enumerate(prob["terms"]):
        coef = _function(tm["coefficient"], f"terms.{i}.coefficient", t0)
        delay = _function(tm["delay"], f"terms.{i}.delay", t0)
        terms.append(Term(coef, DelayArg(delay, name=f"tau_{i + 1}")))
    cand = None
    if prob["candidates"] is not None:
        c = prob["candidates"]
        cand = Candidates(float(c["step"]), float(c["offset"]), int(c.get("n_from", 10)),
                          int(c.get("n_to", 20)))
    overrides = None
    if prob["sigma_overrides"] is not None:
        if len(prob["sigma_overrides"]) != len(terms):
            raise SchemaError(f"expected {len(terms)} entries", "sigma_overrides")
        overrides = [None if s is None else
                     Envelope(_function(s, f"sigma_overrides.{i}", t0), name=f"sigma_{i + 1}")
                     for i, s in enumerate(prob["sigma_overrides"])]
    problem = Problem(t0, terms, cand, overrides)
    diags = validate_problem(problem)
    ev = doc["evaluation"]
    if "template" in doc:
        check = TEMPLATES[doc["template"]][2]
        if check is not None:
            diags += check(doc["params"], ev["epsilon"] or 0.0)
    if diags:
        raise SemanticError(diags)
    minorant = None
    if ev["minorant"] is not None:
        minorant = _function(ev["minorant"], "evaluation.minorant", t0)
    settings = Settings(tol=ev["tol"], horizon=ev["horizon"], sampling=ev["sampling"],
                        samples_per_period=ev["samples_per_period"],
                        tail_fraction=ev["tail_fraction"], grid_points=ev["grid_points"],
                        refine=ev["refine"], inner_delay=ev["inner_delay"],
                        epsilon=ev["epsilon"], eps_sweep=ev["eps_sweep"],
                        ls_symmetric=ev["ls_symmetric"], gks_cap=ev["gks_cap"],
                        minorant=minorant, minorant_const=ev["minorant_const"])
    try:
        crit = resolve(doc["criteria"])
    except KeyError as exc:
        raise SchemaError(str(exc.args[0]), "criteria") from exc
    return RunConfig(doc, problem, settings, crit, doc["output"]["format"],
                     doc["output"]["path"], problem.notes())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise SchemaError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") \
            from exc
    return parse_config(doc, path.parent)


def serialize(rc: RunConfig) -> str:
    return json.dumps(rc.document, indent=2, sort_keys=False) + "\n"


# ----------------------------------------------------------------------
# dotted paths


def _split(path: str):
    return [int(p) if p.lstrip("-").isdigit() else p for p in path.split(".") if p]


def get_path(doc, path: str):
    node = doc
    for key in _split(path):
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError("path does not exist", path) from exc
    return node


def set_path(doc: dict, path: str, value) -> dict:
    """Set the scalar at ``path`` (creating ``params``/``evaluation`` keys as needed)."""
    keys = _split(path)
    if not keys:
        raise SchemaError("empty parameter path", path)
    node = doc
    for key in keys[:-1]:
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError("path does not exist", path) from exc
    last = keys[-1]
    try:
        old = node[last]
    except KeyError:
        if keys[0] not in ("params", "evaluation"):
            raise SchemaError("path does not exist", path) from None
        old = None
    except (IndexError, TypeError) as exc:
        raise SchemaError("path does not exist", path) from exc
    if isinstance(old, (dict, list)):
        raise SchemaError("path does not address a scalar", path)
    node[last] = value
    return doc


def bundled_config_path(example_id: str) -> Path:
    name = "example_" + example_id.replace(".", "_") + ".json"
    return Path(__file__).resolve().parent.parent / "data" / name
