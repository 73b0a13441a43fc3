import math

import mpmath as mp
import numpy as np
import pytest

from oscrit.asymptotics import (SamplingStrategy, Samples, estimate_liminf, estimate_limsup,
                                sample_functional, tail_extremum)
from oscrit.criteria import Evaluator, crit_a
from oscrit.criteria.classical import window_integral
from oscrit.criteria.nested import c_functional, f315_functional
from oscrit.errors import EvaluationFailed, InsufficientSamples

from conftest import constant_problem
from oracles import INV_E


def sampled(F, a, b, n):
    return sample_functional(F, SamplingStrategy.grid(a, b, n))


class TestSampling:
    def test_grid_count(self):
        s = sampled(np.sin, 0, 100, 1000)
        assert len(s) == 1000
        assert np.all(np.diff(s.t) > 0)

    def test_grid_needs_100_points(self):
        with pytest.raises(ValueError):
            SamplingStrategy.grid(0, 1, 50)

    def test_example_4_2_candidates_are_constant(self, example):
        ev = Evaluator(example("4.2").problem, example("4.2").settings)
        s = sample_functional(c_functional(ev), SamplingStrategy.candidates(3, 3, 10, 20))
        assert len(s) == 11
        np.testing.assert_allclose(s.t, 3 * np.arange(10, 21) + 3)
        assert np.ptp(s.values) <= 1e-8

    def test_constant_functional(self):
        s = sampled(lambda t: np.full_like(t, 0.258), 10, 20, 200)
        assert np.all(s.values == 0.258)

    def test_periodic_exact_stays_in_last_two_periods(self):
        st = SamplingStrategy.periodic(3.0, 50, 60.0)
        s = sample_functional(np.cos, st)
        assert s.t.min() >= 54.0 and s.t.max() <= 60.0
        assert len(s) == 101

    def test_failures_name_the_point(self):
        def F(t):
            if np.any(t > 5):
                raise RuntimeError("boom")
            return t
        with pytest.raises(EvaluationFailed) as info:
            sampled(F, 0, 10, 101)
        assert info.value.t > 5

    def test_non_finite_values_rejected(self):
        with pytest.raises(EvaluationFailed):
            sampled(lambda t: np.where(t > 3, np.nan, t), 0, 10, 101)


class TestEstimates:
    def test_sine(self):
        est = estimate_limsup(sampled(np.sin, 0, 200 * math.pi, 100_000))
        assert est.estimate == pytest.approx(1.0, abs=1e-4)
        assert est.stabilized

    def test_reciprocal_decreasing(self):
        est = estimate_limsup(sampled(lambda t: 1 / t, 100, 1000, 1000))
        assert est.estimate <= 0.01
        assert est.trend == "decreasing"
        assert not est.stabilized

    def test_constant_liminf(self):
        ev = Evaluator(constant_problem([0.5], [1]))
        est = ev.liminf(window_integral(ev, 0, ev.args[0]))
        assert est.estimate == pytest.approx(0.5, abs=1e-12)

    def test_example_4_1_weighted_functional(self, example):
        rc = example("4.1")
        alpha, eps = 0.67, rc.settings.epsilon
        ev = Evaluator(rc.problem, rc.settings)
        est = ev.limsup(f315_functional(ev, math.e - eps))
        k = mp.e - eps
        closed = float((mp.e ** (alpha * k) - 1) / k)
        assert est.estimate == pytest.approx(closed, abs=1e-6)

    def test_example_4_1_liminf(self, example):
        rc = example("4.1")
        assert crit_a(rc.problem, rc.settings).value == pytest.approx(INV_E, abs=1e-8)

    def test_example_4_3_liminf_is_zero(self, example):
        rc = example("4.3")
        ev = Evaluator(rc.problem, rc.settings)
        for i in range(2):
            est = ev.liminf(window_integral(ev, i, ev.args[i]))
            assert abs(est.estimate) <= 1e-12

    def test_insufficient_samples(self):
        s = Samples(np.arange(20.0), np.zeros(20), np.zeros(20))
        with pytest.raises(InsufficientSamples):
            estimate_limsup(s, 0.3)

    def test_periodic_exact_equals_one_period_max(self):
        F = lambda t: 0.3 + 0.2 * np.cos(2 * math.pi * t / 3)  # noqa: E731
        s = sample_functional(F, SamplingStrategy.periodic(3.0, 300, 90.0))
        est = estimate_limsup(s, 0.5)
        assert est.estimate == pytest.approx(0.5, abs=1e-12)
        assert est.stabilized and est.spread == 0.0

    def test_refinement_finds_peak_between_samples(self):
        F = lambda t: np.cos(2 * math.pi * (t - 0.123) / 3)  # noqa: E731
        pts = np.linspace(30, 60, 101)
        est, _ = tail_extremum(F, pts, "max", period=3.0)
        assert est.estimate == pytest.approx(1.0, abs=1e-12)
        assert est.stabilized


class TestProperties:
    @pytest.fixture
    def cases(self):
        rng = np.random.default_rng(8)
        out = []
        for _ in range(50):
            n = int(rng.integers(40, 400))
            t = np.sort(rng.uniform(0, 100, n))
            v = rng.normal(size=n).cumsum() * 0.1 + np.sin(t)
            out.append(Samples(t, v, np.zeros(n)))
        return out

    def test_limsup_above_liminf(self, cases):
        for s in cases:
            assert estimate_limsup(s).estimate >= estimate_liminf(s).estimate

    def test_spread_non_negative(self, cases):
        for s in cases:
            assert estimate_limsup(s).spread >= 0
            assert estimate_liminf(s).spread >= 0

    def test_tail_window_monotonicity(self, cases):
        for s in cases:
            small, big = 0.25, 0.5
            assert estimate_limsup(s, big).estimate >= estimate_limsup(s, small).estimate
            assert estimate_liminf(s, big).estimate <= estimate_liminf(s, small).estimate

    def test_scale_equivariance(self, cases):
        for s in cases:
            for c in (0.5, 3.0, 1e3):
                assert estimate_limsup(s.scaled(c)).estimate == c * estimate_limsup(s).estimate
                assert estimate_liminf(s.scaled(c)).estimate == c * estimate_liminf(s).estimate

    def test_stabilized_implies_small_spread(self, cases):
        for s in cases:
            e = estimate_limsup(s)
            if e.stabilized:
                assert e.spread <= 1e-6 * (1 + abs(e.estimate))

    def test_merged_supplement_never_lowers_limsup(self):
        t = np.linspace(0, 30, 301)
        grid = Samples(t, np.sin(t), np.zeros_like(t))
        cand = Samples(np.array([29.845]), np.array([1.0]), np.zeros(1))
        assert estimate_limsup(grid.merged(cand)).estimate >= estimate_limsup(grid).estimate
