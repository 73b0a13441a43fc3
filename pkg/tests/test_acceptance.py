"""Acceptance gate: criteria 1-9, one pass/fail line each.

Every criterion collects its sub-checks and reports all of them before
asserting, so a failing line names exactly which published fact did not
reproduce.
"""
import math

import numpy as np
from scipy.optimize import brentq

from oscrit.cli.config import parse_config, set_path
from oscrit.cli.scan import scan
from oscrit.criteria import (INCONCLUSIVE, OSCILLATORY, crit_3_15, crit_A, crit_a, crit_B,
                             crit_C, crit_FK, crit_T31, crit_T32, lambda_star, run_one)
from oscrit.errors import NoRealRoot
from oscrit.funcmodel import DelayArg, PiecewiseFn, sup_envelope
from oscrit.quadrature import integrate
from oscrit.simulator import OSCILLATORY_EMPIRICAL, POSITIVE, History, residual, simulate

from conftest import constant_problem, monotone_fixtures
from oracles import (EXP_RATE_025, INV_E, b_sequence_4_2, brute_envelope, c_closed_4_2,
                     lambda_star_oracle)

STEP = 1e-3


class Gate:
    def __init__(self, label):
        self.label = label
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def close(self, name, got, want, tol):
        ok = got is not None and math.isfinite(got) and abs(got - want) <= tol
        self.check(name, ok, f"got {got!r}, want {want!r} +/- {tol:g}")

    def within(self, name, got, lo, hi):
        self.check(name, got is not None and lo <= got <= hi, f"got {got!r}, want [{lo}, {hi}]")

    def finish(self, capsys):
        bad = [c for c in self.checks if not c[1]]
        status = "PASS" if not bad else "FAIL"
        line = f"{self.label} {status} ({len(self.checks) - len(bad)}/{len(self.checks)})"
        with capsys.disabled():
            print(f"\n{line}")
            for name, _, detail in bad:
                print(f"    failed: {name}: {detail}")
        assert not bad, "; ".join(f"{n}: {d}" for n, _, d in bad)


def with_params(doc, **params):
    for k, v in params.items():
        doc = set_path(doc, f"params.{k}", v)
    return doc


def crossings(f, lo, hi):
    xs = np.arange(lo, hi + STEP / 2, STEP)
    g = np.array([f(x) - 1 for x in xs])
    return [brentq(lambda x: f(x) - 1, xs[k], xs[k + 1], xtol=1e-14)
            for k in np.nonzero(np.sign(g[:-1]) != np.sign(g[1:]))[0]]


def test_ac1_example_4_2_range(example, example_doc, capsys):
    g = Gate("AC1 example 4.2 range")
    roots = crossings(c_closed_4_2, 0.25, 0.40)
    lower = [r for r in roots if r < 0.33]
    upper = [r for r in roots if r > 0.33]
    g.within("closed form crosses 1 near 0.303", lower[0] if lower else None, 0.302, 0.304)
    g.within("closed form crosses 1 near 0.358", upper[0] if upper else None, 0.357, 0.359)
    res = scan(example_doc("4.2"), "params.p", 0.25, 0.40, STEP, "3.14")
    g.within("scan first oscillatory p", res.first, 0.303 - STEP, 0.303 + STEP)
    g.within("scan last oscillatory p", res.last, 0.358 - STEP, 0.358 + STEP)
    rc = example("4.2")
    g.close("3.14 value at p = 0.33", crit_C(rc.problem, rc.settings).value,
            c_closed_4_2(0.33), 1e-4)
    g.finish(capsys)


def test_ac2_example_4_2_negative_controls(example, capsys):
    g = Gate("AC2 example 4.2 negative controls")
    rc = example("4.2")
    p = rc.document["params"]["p"]
    assert p == 0.33
    pr, st = rc.problem, rc.settings
    a_sig = crit_A(pr, st.with_(sampling="supplement"), use_sigma=True)
    g.close("2.1 with sup-envelope = 2.6p", a_sig.value, 2.6 * p, 1e-8)
    g.check("2.1 with sup-envelope below 1", a_sig.value < 1, a_sig.value)
    low = crit_a(pr, st)
    g.close("2.2 liminf = p", low.value, p, 1e-8)
    g.check("2.2 below 1/e", low.value < INV_E, low.value)
    b = crit_B(pr, st)
    g.close("2.5 along t_n", b.value, b_sequence_4_2(p), 1e-6)
    g.check("2.5 along t_n below 1", b.value < 1, b.value)
    g.check("none of them Oscillatory",
            all(o.verdict != OSCILLATORY for o in (a_sig, low, b)), "")
    g.finish(capsys)


def test_ac3_example_4_4(example, example_doc, capsys):
    g = Gate("AC3 example 4.4")
    doc = example_doc("4.4")
    # the published bound: inner delays at their minima, limsup along t_n = 3n + 3
    doc.setdefault("evaluation", {}).update(sampling="candidates", inner_delay="minorant")
    rc = parse_config(with_params(doc, p1=0.1, p2=0.158))
    d = crit_T31(rc.problem, rc.settings)
    g.check("3.2 lower bound at (0.1, 0.158) exceeds 1/4", d.value > 0.25, d.value)
    res = scan(doc, "params.p2", 0.10, 0.20, STEP, "3.2")
    g.within("scan first oscillatory p2", res.first, 0.157, 0.159)
    rc = example("4.4")
    fk = crit_FK(rc.problem, rc.settings)
    g.close("2.11 value", fk.value, 0.258, 1e-8)
    g.check("2.11 below 1/e", fk.value < INV_E, fk.value)
    g.finish(capsys)


def test_ac4_example_4_1(example, capsys):
    g = Gate("AC4 example 4.1")
    rc = example("4.1")
    pr, st = rc.problem, rc.settings
    alpha, eps = rc.document["params"]["alpha"], st.epsilon
    g.check("alpha window", math.log(1 + math.e) / (math.e - eps) < alpha < math.log(2), alpha)
    b = crit_B(pr, st)
    b_closed = math.expm1(alpha)
    g.close("2.5 value = e^alpha - 1", b.value, b_closed, 1e-6)
    g.check("2.5 below 1", b_closed < 1 and b.value < 1, b.value)
    f = crit_3_15(pr, st)
    f_closed = math.expm1(alpha * (math.e - eps)) / (math.e - eps)
    g.close("3.15 value", f.value, f_closed, 1e-6)
    g.check("3.15 exceeds 1", f_closed > 1 and f.verdict == OSCILLATORY, f.verdict)
    g.close("2.2 liminf = 1/e", crit_a(pr, st).value, INV_E, 1e-8)
    g.finish(capsys)


def test_ac5_example_4_3(example, capsys):
    g = Gate("AC5 example 4.3")
    rc = example("4.3")
    pr, st = rc.problem, rc.settings
    prm = rc.document["params"]
    assert (prm["p"], prm["delta1"], prm["delta2"]) == (0.9, 0.6, 0.6)
    mono = run_one(pr, "3.18", st)
    g.close("3.18 value", mono.value, 0.2916, 1e-12)
    g.check("3.18 value exceeds 1/4", mono.value > 0.25, mono.value)
    for i, dl in enumerate((prm["delta1"], prm["delta2"]), start=1):
        g.check(f"p delta_{i} below 1", prm["p"] * dl < 1, prm["p"] * dl)
        up = run_one(pr, f"2.1@{i}", st)
        g.check(f"term {i} limsup below 1", up.value < 1, up.value)
        g.close(f"term {i} liminf", run_one(pr, f"2.2@{i}", st).value, 0.0, 1e-8)
    g.finish(capsys)


def test_ac6_lambda_star(capsys):
    g = Gate("AC6 lambda* suite")
    g.check("lambda*(0) = 1 exactly", lambda_star(0).value == 1.0, lambda_star(0).value)
    g.close("lambda*(1/e) = e", lambda_star(INV_E).value, math.e, 1e-9)
    ps = np.sort(np.random.default_rng(6).uniform(0, INV_E, 100))
    got = [lambda_star(p) for p in ps]
    worst = max(r.residual for r in got)
    g.check("residual <= 1e-12", worst <= 1e-12, worst)
    g.check("monotone in p", np.all(np.diff([r.value for r in got]) >= 0), "")
    far = max(abs(r.value - lambda_star_oracle(p)) / r.value for p, r in zip(ps[::10], got[::10]))
    g.check("agrees with mpmath", far <= 1e-12, far)
    try:
        lambda_star(0.4)
        g.check("NoRealRoot for 0.4", False, "no exception")
    except NoRealRoot:
        g.check("NoRealRoot for 0.4", True)
    g.finish(capsys)


def test_ac7_properties(capsys):
    g = Gate("AC7 property suites")
    rng = np.random.default_rng(7)
    env_err = 0.0
    for _ in range(10):
        knots = np.unique(np.round(rng.uniform(0, 40, int(rng.integers(3, 12))), 2))
        knots = np.concatenate([[0.0], knots[knots > 0]])
        vals = np.round(rng.uniform(0, 4, len(knots)), 3)
        pieces = [{"from": float(a), "to": float(b),
                   "poly": [float(va - (vb - va) / (b - a) * a), float((vb - va) / (b - a))]}
                  for a, b, va, vb in zip(knots[:-1], knots[1:], vals[:-1], vals[1:])]
        pieces.append({"from": float(knots[-1]), "to": None, "poly": [float(vals[-1])]})
        arg = DelayArg(PiecewiseFn.from_spec({"pieces": pieces}))
        env = sup_envelope(arg)
        ts = np.round(np.arange(0, 40.0005, 1e-3), 3)
        s = env.tau(ts)
        g.check("envelope majorant", np.all(s >= arg.tau(ts) - 1e-12), "")
        g.check("envelope monotone", np.all(np.diff(s) >= -1e-12), "")
        env_err = max(env_err, float(np.max(np.abs(s - brute_envelope(arg.tau, ts)))))
    g.check("envelope minimal vs brute force", env_err <= 1e-9, env_err)

    q_err = 0.0
    for p in (0.05, 0.3, 1.0, 2.0):
        for t in (1.0, 7.5, 40.0):
            got = integrate(lambda s: p * np.exp(p * (t - s)), t - 1, t).value
            q_err = max(q_err, abs(got - math.expm1(p)))
    g.check("quadrature e^p - 1 family", q_err <= 1e-8, q_err)

    for k, pr in enumerate(monotone_fixtures()):
        t31, c = crit_T31(pr), crit_C(pr)
        g.check(f"T31 = C on fixture {k}",
                abs(t31.value - c.value) <= t31.error_bound + c.error_bound + 1e-9,
                (t31.value, c.value))
        t32, f = crit_T32(pr), crit_3_15(pr)
        if t32.details.get("via") or f.details.get("via"):
            g.check(f"T32 = 3.15 on fixture {k}", t32.verdict == f.verdict,
                    (t32.verdict, f.verdict))
        else:
            g.check(f"T32 = 3.15 on fixture {k}",
                    abs(t32.value - f.value) <= t32.error_bound + f.error_bound + 1e-9,
                    (t32.value, f.value))
        a, b = crit_A(pr), crit_B(pr)
        g.check(f"C >= B >= A on fixture {k}",
                c.value >= b.value - (b.error_bound + c.error_bound)
                and b.value >= a.value - (a.error_bound + b.error_bound),
                (c.value, b.value, a.value))
    g.finish(capsys)


def test_ac8_simulator(capsys):
    g = Gate("AC8 simulator cross-check")
    unit = constant_problem([1.0], [1.0])
    for h in (History.constant(1.0), History.constant(-2.0), History.exponential(0.1)):
        tr = simulate(unit, h, 60.0)
        g.check(f"{h.describe()}: >= 10 sign changes", len(tr.zero_crossings) >= 10,
                len(tr.zero_crossings))
        g.check(f"{h.describe()}: OscillatoryEmpirical",
                tr.classification == OSCILLATORY_EMPIRICAL, tr.classification)
    tr = simulate(constant_problem([0.25], [1.0]), History.exponential(EXP_RATE_025), 50.0,
                  0.01)
    g.check("matched exponential positive", tr.classification == POSITIVE
            and np.all(tr.x > 0), tr.classification)
    res = residual(tr, lambda t: np.exp(-EXP_RATE_025 * t))
    g.check("matched exponential residual", res <= 1e-6, res)
    ode = constant_problem([1.0], [0.0])
    e1, e2 = (residual(simulate(ode, History.constant(1.0), 5.0, h), lambda t: np.exp(-t))
              for h in (0.2, 0.1))
    g.check("convergence ratio >= 2^3.5", e1 / e2 >= 2 ** 3.5, e1 / e2)
    g.finish(capsys)


def test_ac9_margin_refuses_threshold(capsys):
    g = Gate("AC9 margin rule at the threshold")
    out = crit_A(constant_problem([1.0], [1.0]))
    g.close("limsup equals 1", out.value, 1.0, 1e-12)
    g.check("verdict Inconclusive", out.verdict == INCONCLUSIVE, out.verdict)
    g.finish(capsys)

