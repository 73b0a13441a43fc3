import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oscrit.cli.config import bundled_config_path, load_config, parse_config  # noqa: E402
from oscrit.funcmodel import DelayArg, PiecewiseFn, Problem, Term  # noqa: E402


def constant_problem(ps, ds, t0=0):
    """m-term problem with constant coefficients ``ps`` and delays ``ds``."""
    terms = [Term(PiecewiseFn.constant(p, t0, name=f"p{i}"),
                  DelayArg(PiecewiseFn.constant(d, t0, name=f"d{i}"), name=f"tau_{i + 1}"))
             for i, (p, d) in enumerate(zip(ps, ds))]
    return Problem(t0, terms)


def monotone_fixtures():
    """Single-term problems with non-decreasing arguments."""
    out = [constant_problem([p], [d]) for p, d in ((0.2, 1), (0.5, 1), (0.3, 2.0), (1.0, 0.7))]
    # slowly varying delay, tau' = 1 - d' > 0
    d = PiecewiseFn.from_spec({"period": 2, "pattern_start": 0,
                               "pattern": [{"from": 0, "to": 1, "poly": [1, 0.5]},
                                           {"from": 1, "to": 2, "poly": [2, -0.5]}]})
    p = PiecewiseFn.from_spec({"period": 2, "pattern_start": 0,
                               "pattern": [{"from": 0, "to": 1, "poly": [0.2]},
                                           {"from": 1, "to": 2, "poly": [0.45]}]})
    out.append(Problem(0, [Term(p, DelayArg(d))]))
    return out


def problem_from(doc):
    return parse_config(doc).problem


@pytest.fixture
def example():
    """Resolved bundled example configuration by id."""
    cache = {}

    def get(eid):
        if eid not in cache:
            cache[eid] = load_config(bundled_config_path(eid))
        return cache[eid]

    return get


@pytest.fixture
def example_doc():
    def get(eid):
        return json.loads(bundled_config_path(eid).read_text())
    return get
