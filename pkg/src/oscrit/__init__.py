"""Numerical oscillation criteria for linear delay differential equations.

Equations ``x'(t) + sum_i p_i(t) x(tau_i(t)) = 0`` with piecewise-polynomial,
eventually periodic data.  See :mod:`oscrit.criteria` for the tests and
:mod:`oscrit.simulator` for the method-of-steps cross-check.
"""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .funcmodel import (Candidates, DelayArg, Envelope, PiecewiseFn, Problem, Term,  # noqa: E402
                        sup_envelope, validate_problem)

__all__ = ["__version__", "BACKEND", "Candidates", "DelayArg", "Envelope", "PiecewiseFn",
           "Problem", "Term", "sup_envelope", "validate_problem"]
