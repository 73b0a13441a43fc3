import math

import numpy as np
import pytest

from oscrit.criteria import (INCONCLUSIVE, NONOSCILLATORY, NOT_APPLICABLE, OSCILLATORY,
                             Settings, aggregate, crit_3_15, crit_A, crit_a, crit_B, crit_C,
                             crit_FK, crit_GKS, crit_Li, crit_LS, crit_mono, crit_pointwise,
                             crit_T31, crit_T32, resolve, run_all, run_one)
from oscrit.criteria.outcome import CriterionOutcome, decide, exceeds
from oscrit.funcmodel import Envelope, Problem

from conftest import constant_problem, monotone_fixtures
from oracles import (B_SEQUENCE_4_2_ROOT, C_UNIT, INV_E, b_constant, b_sequence_4_2,
                     c_closed_4_2, c_constant, weighted_315_unit)


def cp(ps, ds):
    return constant_problem(ps, ds)


class TestMarginRule:
    def test_threshold_exactly_is_inconclusive(self):
        out = crit_A(cp([1.0], [1.0]))
        assert out.value == pytest.approx(1.0, abs=1e-12)
        assert out.verdict == INCONCLUSIVE

    def test_needs_ten_times_error_and_spread(self):
        assert not exceeds(1.0 + 0.9e-9, 1.0, 1e-10, 0.0)
        assert exceeds(1.0 + 1.1e-9, 1.0, 1e-10, 0.0)
        assert not exceeds(1.5, 1.0, 0.0, 0.06)

    def test_oscillatory_outcomes_clear_the_margin(self):
        for out in run_all(cp([0.6, 0.3], [1, 2])):
            assert out.check_margin_rule(), out.criterion_id
            if out.verdict == OSCILLATORY and not out.details.get("via"):
                assert out.value - out.threshold > 10 * (out.error_bound + out.spread)

    def test_floor_applies(self):
        out = decide("x", 1.0, 0.0, 0.0, 0.5)
        assert out.error_bound >= 1e-12


class TestClassical:
    def test_A(self):
        hi, lo = crit_A(cp([1.2], [1])), crit_A(cp([0.5], [1]))
        assert hi.value == pytest.approx(1.2, abs=1e-12) and hi.verdict == OSCILLATORY
        assert lo.value == pytest.approx(0.5, abs=1e-12) and lo.verdict == INCONCLUSIVE

    def test_A_needs_monotone_argument(self, example):
        rc = example("4.2")
        out = crit_A(rc.problem, rc.settings)
        assert out.verdict == NOT_APPLICABLE
        assert out.applicability_notes and "non-decreasing" in out.applicability_notes[0]

    def test_A_with_envelope_example_4_2(self, example):
        rc = example("4.2")
        out = crit_A(rc.problem, rc.settings.with_(sampling="supplement"), use_sigma=True)
        assert out.value == pytest.approx(2.6 * 0.33, abs=1e-8)
        assert out.verdict == INCONCLUSIVE

    def test_a(self):
        osc, non = crit_a(cp([0.5], [1])), crit_a(cp([0.2], [1]))
        assert osc.value == pytest.approx(0.5) and osc.verdict == OSCILLATORY
        assert non.details["limsup"] == pytest.approx(0.2) and non.verdict == NONOSCILLATORY

    def test_a_example_4_2(self, example):
        rc = example("4.2")
        out = crit_a(rc.problem, rc.settings)
        assert out.value == pytest.approx(0.33, abs=1e-8)
        assert out.verdict == INCONCLUSIVE

    @pytest.mark.parametrize("p", [1.0, 0.5, 0.2])
    def test_B_closed_form(self, p):
        out = crit_B(cp([p], [1]))
        assert out.value == pytest.approx(b_constant(p), abs=1e-8)
        assert out.verdict == (OSCILLATORY if b_constant(p) > 1 else INCONCLUSIVE)

    def test_B_example_4_2_sequence(self, example):
        rc = example("4.2")
        out = crit_B(rc.problem, rc.settings)
        assert out.value == pytest.approx(b_sequence_4_2(0.33), abs=1e-6)
        assert out.verdict == INCONCLUSIVE

    def test_LS(self):
        two = crit_LS(cp([0.25, 0.25], [1, 1]))
        assert two.details["values"]["2.7"] == pytest.approx(0.5)
        assert two.verdict == OSCILLATORY
        one = crit_LS(cp([0.2], [1]))
        assert all(v == pytest.approx(0.2) for v in one.details["values"].values())
        assert one.verdict == INCONCLUSIVE

    def test_LS_diagonal_is_p_times_delay(self):
        out = crit_LS(cp([0.1, 0.1], [1.5, 2.5]))
        L = np.array(out.details["L"])
        np.testing.assert_allclose(np.diag(L), [0.15, 0.25], atol=1e-12)

    def test_LS_rejects_variable_delays(self, example):
        rc = example("4.2")
        assert crit_LS(rc.problem, rc.settings).verdict == NOT_APPLICABLE

    def test_Li(self):
        assert crit_Li(cp([0.2, 0.2], [1, 1])).verdict == OSCILLATORY
        lo = crit_Li(cp([0.1, 0.1], [1, 1]))
        assert lo.value == pytest.approx(0.2) and lo.verdict == INCONCLUSIVE

    def test_Li_example_4_3(self, example):
        rc = example("4.3")
        out = crit_Li(rc.problem, rc.settings)
        assert abs(out.value) <= 1e-10 and out.verdict == INCONCLUSIVE

    def test_pointwise(self):
        hy = crit_pointwise(cp([0.3, 0.3], [1, 2]))
        assert hy.details["values"]["hunt_yorke"] == pytest.approx(0.9)
        eq = crit_pointwise(cp([0.9, 0.9], [0.6, 0.6]))
        assert eq.value == pytest.approx(1.08) and eq.verdict == OSCILLATORY
        my = crit_pointwise(cp([0.5], [1]))
        assert my.details["values"]["myshkis"] == pytest.approx(0.5)
        assert my.verdict == OSCILLATORY

    def test_FK(self, example):
        const = crit_FK(cp([0.25, 0.25], [1, 2]))
        assert const.value == pytest.approx(0.5) and const.verdict == OSCILLATORY
        rc = example("4.4")
        out = crit_FK(rc.problem, rc.settings)
        assert out.value == pytest.approx(0.258, abs=1e-8)
        assert out.verdict != OSCILLATORY

    def test_FK_collapses_to_a_for_one_term(self):
        for pr in monotone_fixtures():
            assert crit_FK(pr).value == pytest.approx(crit_a(pr).value, abs=1e-9)

    def test_GKS(self, example):
        out = crit_GKS(cp([0.1, 0.1], [1, 3]))
        assert out.value == pytest.approx(0.4) and out.verdict == OSCILLATORY
        assert any("monitored" in n for n in out.applicability_notes)
        lo = crit_GKS(cp([0.05, 0.05], [1, 2]))
        assert lo.value == pytest.approx(0.15) and lo.verdict == INCONCLUSIVE
        rc = example("4.3")
        na = crit_GKS(rc.problem, rc.settings)
        assert na.verdict == NOT_APPLICABLE and "beta" in na.applicability_notes[0]

    def test_GKS_growing_difference(self):
        out = crit_GKS(cp([0.3, 0.1], [1, 2]))
        assert out.verdict == NOT_APPLICABLE


class TestNested:
    def test_T31_unit(self):
        out = crit_T31(cp([1.0], [1]))
        assert out.value == pytest.approx(C_UNIT, abs=1e-6)
        assert out.verdict == OSCILLATORY

    def test_C_unit(self):
        assert crit_C(cp([1.0], [1])).value == pytest.approx(C_UNIT, abs=1e-6)

    @pytest.mark.parametrize("p,d", [(0.1, 1.0), (0.3, 2.0), (0.6, 0.5)])
    def test_C_constant_closed_form(self, p, d):
        assert crit_C(cp([p], [d])).value == pytest.approx(c_constant(p, d), abs=1e-6)

    def test_C_example_4_2(self, example):
        rc = example("4.2")
        out = crit_C(rc.problem, rc.settings)
        assert out.value == pytest.approx(c_closed_4_2(0.33), abs=1e-4)
        assert out.verdict == OSCILLATORY

    def test_315_unit_inverse_e(self):
        out = crit_3_15(cp([INV_E], [1]))
        eps = out.details["epsilon"]
        assert out.value == pytest.approx(weighted_315_unit(eps), abs=1e-8)

    def test_315_explicit_epsilon(self):
        out = crit_3_15(cp([INV_E], [1]), epsilon=1e-2)
        assert out.value == pytest.approx(weighted_315_unit(1e-2), abs=1e-8)

    def test_315_example_4_1(self, example):
        rc = example("4.1")
        out = crit_3_15(rc.problem, rc.settings)
        eps = 0.05
        closed = math.expm1(0.67 * (math.e - eps)) / (math.e - eps)
        assert out.value == pytest.approx(closed, abs=1e-6)
        assert out.value > math.e / (math.e - eps)
        assert out.verdict == OSCILLATORY

    def test_short_circuit_beyond_inverse_e(self):
        out = crit_3_15(cp([0.5], [1]))
        assert out.verdict == OSCILLATORY
        assert out.details.get("via")

    def test_T32_two_terms_cap(self):
        out = crit_T32(cp([0.5, 0.1], [1, 1]))
        assert out.verdict == OSCILLATORY
        assert any("e" in n for n in out.applicability_notes)

    def test_eps_sweep_is_monotone(self):
        out = crit_3_15(cp([0.3], [1]), Settings(eps_sweep=True))
        sweep = out.details["eps_sweep"]
        vals = [v for _, v in sorted(sweep.items(), key=lambda r: -float(r[0]))]
        assert len(vals) == 3
        assert np.all(np.diff(vals) >= -1e-10)
        assert any("monotonically" in n for n in out.applicability_notes)

    @pytest.mark.parametrize("fn", [crit_T31, crit_T32, crit_C, crit_3_15])
    def test_zero_coefficient(self, fn):
        out = fn(cp([0.0], [1]))
        assert out.value == 0.0 and out.verdict == INCONCLUSIVE

    def test_example_4_4_exact_and_bound(self, example):
        rc = example("4.4")
        exact = crit_T31(rc.problem, rc.settings)
        bound = crit_T31(rc.problem, rc.settings.with_(sampling="candidates",
                                                       inner_delay="minorant"))
        assert exact.verdict == OSCILLATORY
        assert bound.value <= exact.value + exact.error_bound


class TestMono:
    def test_318_constant(self):
        out = crit_mono(cp([0.9, 0.9], [0.6, 0.6]), "3.18")
        assert out.value == pytest.approx(0.2916, abs=1e-12)
        assert out.verdict == OSCILLATORY

    def test_318_example_4_3_value(self, example):
        rc = example("4.3")
        out = crit_mono(rc.problem, "3.18", rc.settings)
        assert out.value == pytest.approx(0.81 * 0.36, abs=1e-12)
        # the coefficients vanish between pulses, so p_i >= const fails
        assert out.verdict == NOT_APPLICABLE

    def test_316_reduces_to_A(self):
        pr = cp([1.2], [1])
        assert crit_mono(pr, "3.16").value == pytest.approx(crit_A(pr).value, abs=1e-12)
        assert crit_mono(pr, "3.16").verdict == OSCILLATORY

    def test_mono_needs_monotone_arguments(self, example):
        rc = example("4.2")
        for v in ("3.16", "3.17", "3.18"):
            assert crit_mono(rc.problem, v, rc.settings).verdict == NOT_APPLICABLE

    def test_example_4_3_product_tests(self, example):
        rc = example("4.3")
        for v in ("3.16", "3.17"):
            assert crit_mono(rc.problem, v, rc.settings).verdict == OSCILLATORY


class TestProperties:
    @pytest.mark.parametrize("k", range(5))
    def test_one_term_reductions(self, k):
        pr = monotone_fixtures()[k]
        t31, c = crit_T31(pr), crit_C(pr)
        assert abs(t31.value - c.value) <= t31.error_bound + c.error_bound + 1e-9
        t32, f = crit_T32(pr), crit_3_15(pr)
        if t32.details.get("via") or f.details.get("via"):
            # liminf above 1/e: both defer to the same direct argument
            assert t32.details.get("via") == f.details.get("via") == "2.2"
            assert t32.verdict == f.verdict == OSCILLATORY
            return
        assert abs(t32.value - f.value) <= t32.error_bound + f.error_bound + 1e-9

    @pytest.mark.parametrize("k", range(5))
    def test_dominance_chain(self, k):
        pr = monotone_fixtures()[k]
        a, b, c = crit_A(pr), crit_B(pr), crit_C(pr)
        assert c.value >= b.value - (b.error_bound + c.error_bound)
        assert b.value >= a.value - (a.error_bound + b.error_bound)

    def test_monotone_collapse(self):
        pr = monotone_fixtures()[4]
        sig = pr.envelope(0)
        ts = np.linspace(5, 30, 2001)
        np.testing.assert_array_equal(sig.tau(ts), pr.terms[0].arg.tau(ts))
        direct = Problem(pr.t0, pr.terms, None, [Envelope(pr.terms[0].arg.delay)])
        assert crit_T31(direct).value == pytest.approx(crit_T31(pr).value, abs=1e-9)

    @pytest.mark.parametrize("ps,ds", [([0.0], [1]), ([0.0, 0.0], [1, 2])])
    def test_zero_coefficients(self, ps, ds):
        for out in run_all(cp(ps, ds)):
            assert out.verdict != OSCILLATORY
            if out.verdict == NOT_APPLICABLE:
                assert out.applicability_notes
                continue
            assert out.value == 0.0
            if out.verdict == NONOSCILLATORY:
                # constants solve x' = 0; only the nonoscillation branches say so
                assert out.criterion_id in ("2.2", "2.11")

    def test_not_applicable_always_explains(self, example):
        for eid in ("4.2", "4.3"):
            rc = example(eid)
            for out in run_all(rc.problem, rc.settings):
                if out.verdict == NOT_APPLICABLE:
                    assert out.applicability_notes, out.criterion_id


class TestSuite:
    def test_resolve(self):
        assert resolve("all")[0] == "2.1" and len(resolve("all")) == 15
        assert resolve("2.2, 3.14") == ["2.2", "3.14"]
        assert resolve(["2.1@2"]) == ["2.1@2"]
        with pytest.raises(KeyError):
            resolve("9.9")

    def test_example_4_2_only_nested_family(self, example):
        rc = example("4.2")
        outs = {o.criterion_id: o for o in run_all(rc.problem, rc.settings)}
        assert outs["3.14"].verdict == OSCILLATORY
        for cid in ("2.1", "2.2", "2.5"):
            assert outs[cid].verdict in (INCONCLUSIVE, NOT_APPLICABLE)
        osc = {c for c, o in outs.items() if o.verdict == OSCILLATORY}
        assert osc <= {"3.2", "3.13", "3.14", "3.15"}
        assert aggregate(outs.values()).verdict == OSCILLATORY

    def test_nonoscillatory_aggregate(self):
        assert aggregate(run_all(cp([0.2], [1]))).verdict == NONOSCILLATORY

    def test_oscillatory_aggregate(self):
        agg = aggregate(run_all(cp([1.2], [1])))
        assert agg.verdict == OSCILLATORY and len(agg.oscillatory) > 1

    def test_per_term_runs_for_several_terms(self):
        ids = [o.criterion_id for o in run_all(cp([0.2, 0.1], [1, 2]))]
        assert "2.1@1" in ids and "2.1@2" in ids and "2.1" not in ids

    def test_subequation_nonoscillation_does_not_transfer(self):
        out = run_one(cp([0.2, 0.1], [1, 2]), "2.2@1")
        assert out.verdict == INCONCLUSIVE
        assert any("says nothing" in n for n in out.applicability_notes)

    def test_conflict_is_noted(self):
        outs = [CriterionOutcome("2.2", 0.2, 0, INV_E, NONOSCILLATORY),
                CriterionOutcome("3.14", 2.0, 0, 1.0, OSCILLATORY)]
        agg = aggregate(outs)
        assert agg.verdict == OSCILLATORY and agg.notes

    def test_b_sequence_crossing(self):
        assert b_sequence_4_2(B_SEQUENCE_4_2_ROOT) == pytest.approx(1.0, abs=1e-14)
