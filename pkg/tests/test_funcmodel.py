import math
from fractions import Fraction

import numpy as np
import pytest

from oscrit.errors import OutOfDomain, PiecewiseError, UnsupportedPieceDegree
from oscrit.funcmodel import (DelayArg, Envelope, PiecewiseFn, Problem, Term, as_fraction,
                              delay_bounds, envelope_of, evaluate, is_nondecreasing,
                              numeric_envelope, sup_envelope, validate_problem)

from conftest import constant_problem
from oracles import INV_E, brute_envelope

N = 7  # an arbitrary period index for the periodic examples


def arg_of(spec, name="tau"):
    return DelayArg(PiecewiseFn.from_spec(spec, name="d"), name=name)


class TestEvaluate:
    def test_example_4_1_coefficient_on_its_flat_piece(self, example):
        p = example("4.1").problem.terms[0].coefficient
        a1, L = 1.0, 4.0  # a_1 and the period 3 + 2*delta
        for k in range(5):
            assert evaluate(p, a1 + k * L + 0.5) == pytest.approx(INV_E, abs=1e-15)

    def test_zero_function(self):
        f = PiecewiseFn.constant(0)
        assert evaluate(f, 0.0) == 0.0
        assert evaluate(f, 1e6) == 0.0

    def test_example_4_2_delay_amount(self, example):
        d = example("4.2").problem.terms[0].arg.delay
        # -3t + (12n + 3) piece: tau(3n + 1.5) = 3n - 1.5, so d = 3
        assert evaluate(d, 3 * N + 1.5) == pytest.approx(3.0, abs=1e-12)

    def test_out_of_domain(self):
        f = PiecewiseFn.constant(1, t0=2)
        with pytest.raises(OutOfDomain):
            f(1.0)
        assert math.isnan(f.values(np.array([1.0]))[0])

    def test_left_limits_at_a_jump(self):
        f = PiecewiseFn.from_spec({"pieces": [{"from": 0, "to": 1, "poly": [2]},
                                              {"from": 1, "to": None, "poly": [5]}]})
        assert f(1.0) == 5.0
        assert f(1.0, side=1) == 2.0

    def test_pattern_periodicity_exact_at_breakpoints(self, example):
        for eid, P in (("4.2", 3.0), ("4.1", 4.0)):
            f = example(eid).problem.terms[0].arg.delay if eid == "4.2" \
                else example(eid).problem.terms[0].coefficient
            start = float(f.regime_start)
            bps = f.breakpoints(start, start + 4 * P)
            for t in bps[bps > start] if len(bps) else bps:
                assert f(t) == f(t + P)
                assert f(t, 1) == f(t + P, 1)
            ts = np.linspace(start, start + 3 * P, 1001)
            np.testing.assert_allclose(f.values(ts), f.values(ts + P), atol=1e-12)

    def test_polynomial_pieces_up_to_cubic(self):
        f = PiecewiseFn.from_spec({"pieces": [{"from": 0, "to": 3, "poly": [1, 0, 0, 1]},
                                              {"from": 3, "to": None, "poly": [28]}]})
        assert f(2.0) == pytest.approx(9.0)
        with pytest.raises(PiecewiseError):
            PiecewiseFn.from_spec({"pieces": [{"from": 0, "to": 1, "poly": [1, 0, 0, 0, 1]},
                                              {"from": 1, "to": None, "poly": [1]}]})

    def test_gaps_and_overlaps_rejected(self):
        with pytest.raises(PiecewiseError, match="overlap"):
            PiecewiseFn.from_spec({"pieces": [{"from": 0, "to": 2, "poly": [1]},
                                              {"from": 1, "to": None, "poly": [1]}]})
        with pytest.raises(PiecewiseError, match="gap"):
            PiecewiseFn.from_spec({"pieces": [{"from": 0, "to": 1, "poly": [1]},
                                              {"from": 2, "to": None, "poly": [1]}]})

    def test_nonnegativity_flag_checks_interior_minimum(self):
        # 1 - 3t + 2t^2 dips to -1/8 at t = 3/4 although both ends are >= 0
        spec = {"pieces": [{"from": 0, "to": 1, "poly": [1, -3, 2]},
                           {"from": 1, "to": None, "poly": [0]}]}
        with pytest.raises(PiecewiseError):
            PiecewiseFn.from_spec(spec, nonneg=True)

    def test_rational_breakpoints_are_exact(self):
        assert as_fraction("7/3") == Fraction(7, 3)
        assert as_fraction(0.1) == Fraction(1, 10)
        assert as_fraction(np.float64(1.5)) == Fraction(3, 2)


class TestMonotonicity:
    def test_unit_shift(self):
        assert is_nondecreasing(arg_of(1))

    def test_example_4_2_is_not_monotone(self, example):
        assert not is_nondecreasing(example("4.2").problem.terms[0].arg)

    def test_example_4_3_shifts(self, example):
        for term in example("4.3").problem.terms:
            assert is_nondecreasing(term.arg)

    def test_downward_jump_detected(self):
        # d jumps up by 0.5 at t = 2, so tau jumps down
        spec = {"pieces": [{"from": 0, "to": 2, "poly": [1]},
                           {"from": 2, "to": None, "poly": [1.5]}]}
        assert not is_nondecreasing(arg_of(spec))

    def test_curved_piece_uses_derivative(self):
        # d = 0.4 t^2 on [0, 2): tau' = 1 - 0.8 t turns negative after 1.25
        spec = {"pieces": [{"from": 0, "to": 2, "poly": [0, 0, 0.4]},
                           {"from": 2, "to": None, "poly": [1.6]}]}
        assert not is_nondecreasing(arg_of(spec))
        spec = {"pieces": [{"from": 0, "to": 1, "poly": [0, 0, 0.4]},
                           {"from": 1, "to": None, "poly": [0.4]}]}
        assert is_nondecreasing(arg_of(spec))


class TestEnvelope:
    def test_monotone_argument_is_its_own_envelope(self):
        a = arg_of(1)
        ts = np.linspace(0, 20, 2001)
        np.testing.assert_array_equal(sup_envelope(a).tau(ts), a.tau(ts))

    def test_example_4_2_envelope(self, example):
        env = sup_envelope(example("4.2").problem.terms[0].arg)
        n = N
        for u in np.linspace(0, 1, 11):
            assert env.tau(3 * n + u) == pytest.approx(3 * n + u - 1, abs=1e-12)
        for u in np.linspace(1, 2.6, 17):
            assert env.tau(3 * n + u) == pytest.approx(3 * n, abs=1e-12)
        for u in np.linspace(2.6, 3, 5):
            t = 3 * n + u
            assert env.tau(t) == pytest.approx(5 * t - (12 * n + 13), abs=1e-12)

    def test_example_4_4_second_plateau(self, example):
        env = sup_envelope(example("4.4").problem.terms[1].arg)
        n = N
        for u in np.linspace(1, 7 / 3, 20):
            assert env.tau(3 * n + u) == pytest.approx(3 * n - 1, abs=1e-12)
        # the plateau ends exactly at the rational breakpoint 7/3
        lag = env.lag
        assert Fraction(3 * n) + Fraction(7, 3) in [Fraction(b).limit_denominator(1000)
                                                    for b in lag.breakpoints(3 * n, 3 * n + 3)]

    @pytest.mark.parametrize("eid", ["4.2", "4.4"])
    def test_invariants_on_examples(self, example, eid):
        for term in example(eid).problem.terms:
            env = sup_envelope(term.arg)
            ts = np.linspace(0, 40, 40001)
            s, tau = env.tau(ts), term.arg.tau(ts)
            assert np.all(s >= tau - 1e-12)
            assert np.all(s <= ts + 1e-12)
            assert np.all(np.diff(s) >= -1e-12)

    def test_idempotent(self, example):
        env = sup_envelope(example("4.2").problem.terms[0].arg)
        again = sup_envelope(env)
        ts = np.linspace(0, 50, 10_000)
        np.testing.assert_array_equal(again.tau(ts), env.tau(ts))
        for b in env.lag.breakpoints(0, 50):
            assert again.tau(b) == env.tau(b)

    @pytest.mark.parametrize("seed", range(20))
    def test_brute_force_scan(self, seed):
        rng = np.random.default_rng(100 + seed)
        # continuous piecewise-affine delay amounts with knots on the scan grid
        knots = np.unique(np.round(np.sort(rng.uniform(0, 50, int(rng.integers(3, 15)))), 2))
        knots = np.concatenate([[0.0], knots[knots > 0]])
        vals = np.round(rng.uniform(0, 4, len(knots)), 3)
        pieces = []
        for (a, b), (va, vb) in zip(zip(knots[:-1], knots[1:]), zip(vals[:-1], vals[1:])):
            slope = (vb - va) / (b - a)
            pieces.append({"from": float(a), "to": float(b),
                           "poly": [float(va - slope * a), float(slope)]})
        pieces.append({"from": float(knots[-1]), "to": None, "poly": [float(vals[-1])]})
        a = arg_of({"pieces": pieces})
        env = sup_envelope(a)
        ts = np.round(np.arange(0, 50.0005, 1e-3), 3)
        np.testing.assert_allclose(env.tau(ts), brute_envelope(a.tau, ts), atol=1e-9,
                                   rtol=0)

    def test_curved_argument_falls_back_to_grid(self):
        spec = {"period": 2, "pattern_start": 0,
                "pattern": [{"from": 0, "to": 2, "poly": [0.5, 1.5, -0.5]}]}
        a = arg_of(spec)
        with pytest.raises(UnsupportedPieceDegree):
            sup_envelope(a)
        env = envelope_of(a)
        assert env.resolution > 0
        ts = np.linspace(0, 20, 20001)
        s = env.tau(ts)
        assert np.all(np.diff(s) >= -1e-9)
        assert np.all(s >= a.tau(ts) - 10 * env.resolution)
        np.testing.assert_allclose(s, brute_envelope(a.tau, ts), atol=10 * env.resolution)

    def test_numeric_envelope_matches_exact_on_affine(self, example):
        a = example("4.2").problem.terms[0].arg
        ts = np.linspace(0, 30, 3001)
        np.testing.assert_allclose(numeric_envelope(a, 2000).tau(ts), sup_envelope(a).tau(ts),
                                   atol=1e-2)


class TestBounds:
    def test_constant(self):
        assert delay_bounds(arg_of(1)) == (1, 1)

    def test_example_4_2_one_period(self, example):
        a = example("4.2").problem.terms[0].arg
        lo, hi = delay_bounds(a, (3 * N, 3 * N + 3))
        assert (float(lo), float(hi)) == (1.0, 5.0)

    def test_example_4_3(self, example):
        lo, hi = delay_bounds(example("4.3").problem.terms[0].arg)
        assert float(lo) == float(hi) == 0.6


class TestValidate:
    def test_example_4_2_valid(self, example):
        assert validate_problem(example("4.2").problem) == []

    def test_negative_coefficient(self):
        diags = validate_problem(constant_problem([-0.1], [1]))
        assert len(diags) == 1 and "negative" in diags[0]

    def test_override_above_diagonal(self):
        pr = constant_problem([0.5], [1])
        bad = Envelope(PiecewiseFn.constant(-1), name="sigma")  # sigma = t + 1
        pr = Problem(pr.t0, pr.terms, None, [bad])
        diags = validate_problem(pr)
        assert any("sigma(t) <= t" in d for d in diags)

    def test_override_below_argument(self):
        pr = constant_problem([0.5], [1])
        low = Envelope(PiecewiseFn.constant(2), name="sigma")  # sigma = t - 2 < tau
        pr = Problem(pr.t0, pr.terms, None, [low])
        assert any("tau(t) <= sigma(t)" in d for d in validate_problem(pr))

    def test_negative_delay(self):
        pr = Problem(0, [Term(PiecewiseFn.constant(1), arg_of(-0.5))])
        assert any("negative delay" in d for d in validate_problem(pr))

    def test_argument_must_tend_to_infinity(self):
        spec = {"pieces": [{"from": 0, "to": None, "poly": [1, 1]}]}  # tau = -1
        pr = Problem(0, [Term(PiecewiseFn.constant(1), arg_of(spec))])
        assert any("infinity" in d for d in validate_problem(pr))

    def test_discontinuous_coefficient_is_a_note_not_an_error(self, example):
        pr = example("4.3").problem
        assert validate_problem(pr) == []
        assert any("a.e." in n for n in pr.notes())
