"""Criterion outcomes and the verdict margin rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

OSCILLATORY = "Oscillatory"
NONOSCILLATORY = "NonoscillatoryExists"
INCONCLUSIVE = "Inconclusive"
NOT_APPLICABLE = "NotApplicable"
VERDICTS = (OSCILLATORY, NONOSCILLATORY, INCONCLUSIVE, NOT_APPLICABLE)

MARGIN_FACTOR = 10.0
# every bound carries at least this relative rounding allowance
ROUNDING_FLOOR = 1e-12


def floor_error(value: float, error: float) -> float:
    """Error bound with the rounding floor applied."""
    return max(float(error), 0.0) + ROUNDING_FLOOR * (1.0 + abs(value))


def margin_required(error: float, spread: float) -> float:
    return MARGIN_FACTOR * (error + spread)


def exceeds(value: float, threshold: float, error: float, spread: float) -> bool:
    """``value > threshold`` asserted only with a clear numerical margin."""
    return value - threshold > margin_required(error, spread)


def below(value: float, threshold: float, error: float, spread: float) -> bool:
    """``value < threshold`` asserted only with a clear numerical margin."""
    return threshold - value > margin_required(error, spread)


@dataclass
class CriterionOutcome:
    """One criterion's value, error bound, threshold and verdict."""

    criterion_id: str
    value: float
    error_bound: float
    threshold: float
    verdict: str
    applicability_notes: list = field(default_factory=list)
    strategy_used: Optional[dict] = None
    spread: float = 0.0
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def margin(self) -> float:
        if self.value is None or math.isnan(self.value):
            return math.nan
        return self.value - self.threshold

    @property
    def required_margin(self) -> float:
        return margin_required(self.error_bound, self.spread)

    def check_margin_rule(self) -> bool:
        """True unless an Oscillatory verdict violates the margin rule."""
        if self.verdict != OSCILLATORY:
            return True
        if self.details.get("via"):
            return True
        return self.margin > self.required_margin


def not_applicable(cid: str, threshold: float, note: str, value: float = math.nan,
                   error_bound: float = 0.0, **kw) -> CriterionOutcome:
    return CriterionOutcome(cid, value, error_bound, threshold, NOT_APPLICABLE, [note], **kw)


def decide(cid: str, value: float, error: float, spread: float, threshold: float,
           notes=None, strategy=None, details=None) -> CriterionOutcome:
    """Oscillatory/Inconclusive verdict for a ``value > threshold`` criterion."""
    err = floor_error(value, error)
    verdict = OSCILLATORY if exceeds(value, threshold, err, spread) else INCONCLUSIVE
    return CriterionOutcome(cid, float(value), err, float(threshold), verdict,
                            list(notes or []), strategy, float(spread), dict(details or {}))
