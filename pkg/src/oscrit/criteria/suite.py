"""Criterion registry, batch execution and the aggregate verdict."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..funcmodel import Problem
from .classical import (crit_A, crit_a, crit_B, crit_FK, crit_GKS, crit_Li, crit_LS,
                        crit_mono, crit_pointwise)
from .context import Evaluator, Settings
from .nested import crit_3_15, crit_C, crit_T31, crit_T32
from .outcome import INCONCLUSIVE, NONOSCILLATORY, OSCILLATORY, CriterionOutcome

REGISTRY = {
    "2.1": crit_A,
    "2.2": crit_a,
    "2.5": crit_B,
    "2.6-2.9": crit_LS,
    "2.10": crit_Li,
    "pointwise": crit_pointwise,
    "2.11": crit_FK,
    "2.12": crit_GKS,
    "3.2": crit_T31,
    "3.13": crit_T32,
    "3.14": crit_C,
    "3.15": crit_3_15,
    "3.16": lambda pr, st=None: crit_mono(pr, "3.16", st),
    "3.17": lambda pr, st=None: crit_mono(pr, "3.17", st),
    "3.18": lambda pr, st=None: crit_mono(pr, "3.18", st),
}
CRITERIA = tuple(REGISTRY)
SINGLE_TERM = ("2.1", "2.2", "2.5", "3.14", "3.15")
# only these branches can certify a nonoscillatory solution
NONOSC_SOURCES = ("2.2", "2.11")


def base_id(cid: str) -> str:
    return cid.split("@")[0]


def resolve(selection) -> list:
    """Criterion ids from ``"all"``, a comma list or an iterable."""
    if selection is None or selection == "all":
        return list(CRITERIA)
    if isinstance(selection, str):
        selection = [s.strip() for s in selection.split(",") if s.strip()]
    out = []
    for s in selection:
        if s == "all":
            out.extend(CRITERIA)
        elif base_id(s) in REGISTRY:
            out.append(s)
        else:
            raise KeyError(f"unknown criterion {s!r}; known: {', '.join(CRITERIA)}")
    return list(dict.fromkeys(out))


def run_one(problem: Problem, cid: str, settings: Optional[Settings] = None,
            evaluator: Optional[Evaluator] = None) -> CriterionOutcome:
    """One criterion; ``"ID@i"`` runs it on the sub-equation of term ``i``."""
    base, _, term = cid.partition("@")
    fn = REGISTRY[base]
    if term:
        i = int(term) - 1
        if not 0 <= i < problem.m:
            raise KeyError(f"{cid}: term index out of range 1..{problem.m}")
        out = fn(Evaluator(problem.single(i), settings))
        return per_term(out, i)
    ev = evaluator or Evaluator(problem, settings)
    return fn(ev)


def per_term(out: CriterionOutcome, i: int) -> CriterionOutcome:
    """Relabel a sub-equation outcome; oscillation transfers, nonoscillation does not."""
    out.criterion_id = f"{out.criterion_id}@{i + 1}"
    out.applicability_notes.insert(0, f"applied to the sub-equation of term {i + 1}")
    if out.verdict == OSCILLATORY:
        out.applicability_notes.append("oscillation of one sub-equation implies oscillation "
                                       "of the full equation")
    elif out.verdict == NONOSCILLATORY:
        out.verdict = INCONCLUSIVE
        out.applicability_notes.append("a nonoscillatory sub-equation says nothing about "
                                       "the full equation")
    return out


def run_all(problem: Problem, settings: Optional[Settings] = None, criteria=None) -> list:
    """Every selected criterion; single-term tests run per term when ``m > 1``."""
    ids = resolve(criteria)
    ev = Evaluator(problem, settings)
    outs = []
    for cid in ids:
        if "@" in cid or problem.m == 1 or cid not in SINGLE_TERM:
            outs.append(run_one(problem, cid, settings, ev))
            continue
        for i in range(problem.m):
            outs.append(run_one(problem, f"{cid}@{i + 1}", settings))
    return outs


@dataclass
class Aggregate:
    verdict: str
    oscillatory: list = field(default_factory=list)
    nonoscillatory: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def aggregate(outcomes) -> Aggregate:
    osc = [o.criterion_id for o in outcomes if o.verdict == OSCILLATORY]
    non = [o.criterion_id for o in outcomes
           if o.verdict == NONOSCILLATORY and o.criterion_id in NONOSC_SOURCES]
    notes = []
    if osc and non:
        notes.append("conflicting verdicts: " + ", ".join(osc) + " vs " + ", ".join(non))
    if osc:
        return Aggregate(OSCILLATORY, osc, non, notes)
    if non:
        return Aggregate(NONOSCILLATORY, osc, non, notes)
    return Aggregate(INCONCLUSIVE, osc, non, notes)
