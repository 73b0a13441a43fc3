"""Oscillation and nonoscillation criteria."""
from .classical import (crit_A, crit_a, crit_B, crit_FK, crit_GKS, crit_Li, crit_LS,
                        crit_mono, crit_pointwise)
from .context import Evaluator, Settings
from .lambda_star import LambdaStar, lambda_star
from .nested import crit_3_15, crit_C, crit_T31, crit_T32
from .outcome import (INCONCLUSIVE, NONOSCILLATORY, NOT_APPLICABLE, OSCILLATORY, VERDICTS,
                      CriterionOutcome)
from .suite import CRITERIA, REGISTRY, aggregate, resolve, run_all, run_one

__all__ = [
    "CRITERIA", "REGISTRY", "Evaluator", "Settings", "LambdaStar", "CriterionOutcome",
    "OSCILLATORY", "NONOSCILLATORY", "INCONCLUSIVE", "NOT_APPLICABLE", "VERDICTS",
    "lambda_star", "crit_A", "crit_a", "crit_B", "crit_LS", "crit_Li", "crit_pointwise",
    "crit_FK", "crit_GKS", "crit_T31", "crit_T32", "crit_C", "crit_3_15", "crit_mono",
    "run_all", "run_one", "aggregate", "resolve",
]
