"""Classical oscillation tests: integral, pointwise and constant-delay families."""
from __future__ import annotations

import math
import time

import numpy as np

from ..funcmodel import combine, fn_sum, pointwise_min
from ..quadrature import integrate
from .context import Evaluator
from .lambda_star import INV_E
from .outcome import (INCONCLUSIVE, NONOSCILLATORY, OSCILLATORY, CriterionOutcome, below,
                      decide, exceeds, floor_error, not_applicable)


def evaluator(problem, settings=None) -> Evaluator:
    if isinstance(problem, Evaluator):
        return problem
    return Evaluator(problem, settings)


def timed(fn):
    """Record wall time of a criterion in ``outcome.elapsed``."""

    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        out.elapsed = time.perf_counter() - t0
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


def window_integral(ev: Evaluator, i: int, arg, coefficient=None):
    """``t -> int_{arg(t)}^{t} p_i`` from exact antiderivatives."""
    f = ev.coefficients[i] if coefficient is None else coefficient

    def F(t, side=0):
        return f.antiderivative(t) - f.antiderivative(arg.tau(t, side))

    return F


def summed(funcs):
    def F(t, side=0):
        return sum(f(t, side) for f in funcs)
    return F


def tail_details(est) -> dict:
    out = {"t_at": est.t_at, "samples": est.samples_used, "trend": est.trend,
           "stabilized": est.stabilized}
    if not math.isnan(est.previous):
        out["previous_window"] = est.previous
    return out


def single_term_required(cid, threshold):
    return not_applicable(cid, threshold, "requires a single term (m = 1); "
                          "evaluated per term instead")


def _monotone_terms(ev):
    return [i for i, a in enumerate(ev.args) if not a.is_nondecreasing()]


# ----------------------------------------------------------------------
# single-argument integral tests


@timed
def crit_A(problem, settings=None, use_sigma=False) -> CriterionOutcome:
    """``A = limsup int_{tau(t)}^t p > 1`` for a non-decreasing argument.

    With ``use_sigma`` the sup-envelope replaces ``tau``; that value is
    dominated by the exponentially weighted B-test and therefore still a
    valid sufficient condition.
    """
    ev = evaluator(problem, settings)
    cid = "2.1"
    if ev.m != 1:
        return single_term_required(cid, 1.0)
    strategy = ev.strategy()
    sig_est = ev.limsup(window_integral(ev, 0, ev.sigmas[0]))
    sig_details = {"limsup_sigma": sig_est.estimate, "limsup_sigma_error":
                   floor_error(sig_est.estimate, sig_est.error_bound)}
    if use_sigma:
        out = decide(cid, sig_est.estimate, sig_est.error_bound, sig_est.spread, 1.0,
                     ["argument replaced by its sup-envelope"], strategy,
                     {**tail_details(sig_est), "argument": "sigma"})
        return out
    if not ev.args[0].is_nondecreasing():
        return not_applicable(cid, 1.0, "argument is not non-decreasing; "
                              f"limsup with the sup-envelope is {sig_est.estimate:.10g}",
                              strategy_used=strategy, details=sig_details)
    est = ev.limsup(window_integral(ev, 0, ev.args[0]))
    return decide(cid, est.estimate, est.error_bound, est.spread, 1.0, est.notes, strategy,
                  tail_details(est))


@timed
def crit_a(problem, settings=None) -> CriterionOutcome:
    """``liminf int_{tau}^t p > 1/e`` (oscillation) and ``limsup < 1/e`` (nonoscillation)."""
    ev = evaluator(problem, settings)
    cid = "2.2"
    if ev.m != 1:
        return single_term_required(cid, INV_E)
    F = window_integral(ev, 0, ev.args[0])
    lo = ev.liminf(F)
    hi = ev.limsup(F)
    notes = list(lo.notes)
    err = floor_error(lo.estimate, lo.error_bound)
    details = {**tail_details(lo), "limsup": hi.estimate, "limsup_spread": hi.spread}
    if exceeds(lo.estimate, INV_E, err, lo.spread):
        verdict = OSCILLATORY
    else:
        verdict = INCONCLUSIVE
        hi_err = floor_error(hi.estimate, hi.error_bound)
        if below(hi.estimate, INV_E, hi_err, hi.spread):
            if ev.args[0].is_nondecreasing():
                verdict = NONOSCILLATORY
                details["branch"] = "limsup < 1/e"
            else:
                notes.append("limsup below 1/e but the nonoscillation branch needs a "
                             "non-decreasing argument")
    return CriterionOutcome(cid, lo.estimate, err, INV_E, verdict, notes, ev.strategy(),
                            lo.spread, details)


def b_functional(ev: Evaluator):
    """``int_{sigma(t)}^t p(s) exp(int_{tau(s)}^{sigma(t)} p) ds`` for one term."""
    bps = ev.integration_breakpoints()

    def F(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        P_sig = ev.P(0, ev.sigma(0, t))

        def weight(i, own, s):
            return P_sig[own] - ev.P(0, ev.tau(0, s))

        v, e = ev.weighted_integrals(t, [(0, 0)], weight, bps=bps)
        return v[:, 0], e[:, 0]

    return F


@timed
def crit_B(problem, settings=None) -> CriterionOutcome:
    """Exponentially weighted limsup test, valid for non-monotone arguments."""
    ev = evaluator(problem, settings)
    cid = "2.5"
    if ev.m != 1:
        return single_term_required(cid, 1.0)
    est = ev.limsup(b_functional(ev))
    return decide(cid, est.estimate, est.error_bound, est.spread, 1.0, est.notes,
                  ev.strategy(), tail_details(est))


# ----------------------------------------------------------------------
# constant delays


def constant_delays(ev: Evaluator):
    """Delay constants, or None when some delay varies."""
    out = []
    for a in ev.args:
        lo, hi = a.delay.bounds()
        if lo != hi:
            return None
        out.append(float(lo))
    return out


class _Shift:
    def __init__(self, lag):
        self.lag = lag

    def tau(self, t, side=0):
        return np.asarray(t, dtype=float) - self.lag


@timed
def crit_LS(problem, settings=None) -> CriterionOutcome:
    """The four constant-delay conditions; the best margin is reported."""
    ev = evaluator(problem, settings)
    cid = "2.6-2.9"
    st = ev.settings
    delays = constant_delays(ev)
    if delays is None:
        return not_applicable(cid, INV_E, "requires constant delays")
    m = ev.m
    L = np.zeros((m, m))
    Le = np.zeros((m, m))
    Ls = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            est = ev.liminf(window_integral(ev, i, _Shift(delays[j])))
            L[i, j], Le[i, j], Ls[i, j] = est.estimate, est.error_bound, est.spread
    notes = []
    half = [ev.liminf(window_integral(ev, i, _Shift(delays[i] / 2))).estimate for i in range(m)]
    if min(half) <= 0:
        notes.append("side hypothesis liminf int_{t-d_i/2}^t p_i > 0 fails for some term")
    dmin = min(delays)
    total = fn_sum(ev.coefficients)
    e27 = ev.liminf(window_integral(ev, 0, _Shift(dmin), coefficient=total))

    cands = {}
    k = int(np.argmax(np.diag(L)))
    cands["2.6"] = (L[k, k], Le[k, k], Ls[k, k])
    cands["2.7"] = (e27.estimate, e27.error_bound, e27.spread)
    rows = L.sum(axis=1)
    v28 = float(np.prod(np.maximum(rows, 0)) ** (1 / m))
    up = float(np.prod(rows + Le.sum(axis=1)) ** (1 / m))
    cands["2.8"] = (v28, up - v28, float(Ls.sum()))
    diag = np.diag(L)
    v29 = diag.sum() / m
    e29 = np.diag(Le).sum() / m
    for i in range(m):
        for j in range(i + 1, m):
            other = L[j, i] if st.ls_symmetric else L[i, i]
            prod = max(L[i, j] * other, 0.0)
            v29 += 2 / m * math.sqrt(prod)
            e29 += 2 / m * math.sqrt(prod + (Le[i, j] + Le[i, i]) * (abs(L[i, j]) + abs(other) + 1)) \
                - 2 / m * math.sqrt(prod)
    cands["2.9"] = (float(v29), float(e29), float(Ls.sum()))
    if m > 1:
        notes.append("(2.9) cross terms pair L_ij with L_ji" if st.ls_symmetric else
                     "(2.9) cross terms pair L_ij with L_ii as printed")
    best, best_margin = None, -math.inf
    for key, (v, e, s) in cands.items():
        e = floor_error(v, e)
        notes.append(f"({key}) value {v:.10g}")
        marg = (v - INV_E) - 10 * (e + s)
        if marg > best_margin:
            best, best_margin = key, marg
    v, e, s = cands[best]
    return decide(cid, v, e, s, INV_E, notes, ev.strategy(),
                  {"best": best, "values": {k: c[0] for k, c in cands.items()},
                   "L": L.tolist()})


@timed
def crit_Li(problem, settings=None) -> CriterionOutcome:
    """``liminf sum_i int_{t-d_i}^t p_i > 1/e`` for constant delays."""
    ev = evaluator(problem, settings)
    cid = "2.10"
    if constant_delays(ev) is None:
        return not_applicable(cid, INV_E, "requires constant delays")
    F = summed([window_integral(ev, i, ev.args[i]) for i in range(ev.m)])
    est = ev.liminf(F)
    return decide(cid, est.estimate, est.error_bound, est.spread, INV_E, est.notes,
                  ev.strategy(), tail_details(est))


# ----------------------------------------------------------------------
# pointwise tests


@timed
def crit_pointwise(problem, settings=None) -> CriterionOutcome:
    """Hunt-Yorke ``liminf sum d_i p_i`` and, for one term, Myshkis ``liminf d * liminf p``."""
    ev = evaluator(problem, settings)
    cid = "pointwise"
    notes = []
    branches = {}
    bounded = all(math.isfinite(a.delay.bounds()[1]) for a in ev.args)
    if bounded:
        def hy(t, side=0):
            return sum(ev.args[i].delay.values(t, side) * ev.p(i, t, side) for i in range(ev.m))
        est = ev.liminf(hy, left_limits=True)
        branches["hunt_yorke"] = (est.estimate, est.error_bound, est.spread)
    else:
        notes.append("Hunt-Yorke: delays have no uniform upper bound")
    if ev.m == 1:
        d = ev.args[0].delay
        if math.isfinite(d.bounds(d.regime_start, None)[1]):
            dl = ev.liminf(lambda t, side=0: d.values(t, side), left_limits=True)
            pl = ev.liminf(lambda t, side=0: ev.p(0, t, side), left_limits=True)
            v = dl.estimate * pl.estimate
            e = dl.error_bound * abs(pl.estimate) + pl.error_bound * abs(dl.estimate)
            s = dl.spread * abs(pl.estimate) + pl.spread * abs(dl.estimate)
            branches["myshkis"] = (v, e, s)
        else:
            notes.append("Myshkis: limsup of the delay is infinite")
    else:
        notes.append("Myshkis branch needs a single term")
    if not branches:
        return not_applicable(cid, INV_E, "; ".join(notes))
    best = max(branches, key=lambda k: branches[k][0] - INV_E
               - 10 * (floor_error(branches[k][0], branches[k][1]) + branches[k][2]))
    for k, (v, _, _) in branches.items():
        notes.append(f"{k} value {v:.10g}")
    v, e, s = branches[best]
    return decide(cid, v, e, s, INV_E, notes, ev.strategy(),
                  {"best": best, "values": {k: b[0] for k, b in branches.items()}})


# ----------------------------------------------------------------------
# several arguments


@timed
def crit_FK(problem, settings=None) -> CriterionOutcome:
    """Fukagai-Kusano: ``liminf int_{tau^*(t)}^t sum p_i > 1/e`` with ``tau^*``
    the sup-envelope of ``max_i tau_i``; nonoscillation half via ``min_i tau_i``.
    """
    ev = evaluator(problem, settings)
    cid = "2.11"
    upper, lower = ev.fk_arguments()
    if upper is None:
        return not_applicable(cid, INV_E, "max of the arguments is not piecewise affine")
    total = fn_sum(ev.coefficients)
    F = window_integral(ev, 0, upper, coefficient=total)
    est = ev.liminf(F)
    err = floor_error(est.estimate, est.error_bound)
    notes = list(est.notes)
    details = tail_details(est)
    verdict = OSCILLATORY if exceeds(est.estimate, INV_E, err, est.spread) else INCONCLUSIVE
    if verdict != OSCILLATORY:
        if lower is None:
            notes.append("nonoscillation half skipped: min of the arguments is not piecewise affine")
        elif not lower.is_nondecreasing():
            notes.append("nonoscillation half skipped: min of the arguments is not non-decreasing")
        else:
            G = window_integral(ev, 0, lower, coefficient=total)
            hi = ev.limsup(G)
            details["nonoscillation_limsup"] = hi.estimate
            if below(hi.estimate, INV_E, floor_error(hi.estimate, hi.error_bound), hi.spread):
                verdict = NONOSCILLATORY
                details["branch"] = "int_{min tau}^t sum p <= 1/e"
    return CriterionOutcome(cid, est.estimate, err, INV_E, verdict, notes, ev.strategy(),
                            est.spread, details)


def difference_integral(ev: Evaluator, i: int, j: int, horizon: float):
    """Partial integral of ``|p_i - p_j|`` over ``[t0, horizon]`` and its growth per period."""
    diff = combine([ev.coefficients[i], ev.coefficients[j]], _sub_op, name="diff")
    lo, hi = diff.bounds(diff.regime_start, None)
    eventually_zero = lo == 0 and hi == 0
    t0 = float(diff.t0)
    bps = np.concatenate([diff.breakpoints(t0, horizon), [t0, horizon]])
    J = integrate(lambda x: np.abs(diff.values(x)), t0, horizon, 1e-10, bps).value
    span = float(diff.period or 1)
    tail = integrate(lambda x: np.abs(diff.values(x)), max(t0, horizon - span), horizon,
                     1e-10, bps).value
    return J, tail, eventually_zero


def _sub_op(lo, hi, cl):
    # coefficient lists of the two operands at the same local origin
    a, b = cl
    n = max(len(a), len(b))
    a = tuple(a) + (0,) * (n - len(a))
    b = tuple(b) + (0,) * (n - len(b))
    return [(lo, hi, tuple(x - y for x, y in zip(a, b)))]


@timed
def crit_GKS(problem, settings=None) -> CriterionOutcome:
    """``sum_i liminf int_{tau_i}^t p_i > 1/e`` for non-decreasing arguments
    with integrable coefficient differences and positive per-term liminfs."""
    ev = evaluator(problem, settings)
    cid = "2.12"
    bad = _monotone_terms(ev)
    if bad:
        return not_applicable(cid, INV_E, "argument(s) " + ", ".join(str(i + 1) for i in bad)
                              + " not non-decreasing")
    ests = [ev.liminf(window_integral(ev, i, ev.args[i])) for i in range(ev.m)]
    betas = [e.estimate for e in ests]
    for i, e in enumerate(ests):
        err = floor_error(e.estimate, e.error_bound)
        if not exceeds(e.estimate, 0.0, err, e.spread):
            return not_applicable(cid, INV_E, f"beta_{i + 1} = liminf int p_{i + 1} "
                                  f"= {e.estimate:.3g} is not verified positive",
                                  details={"betas": betas})
    notes = []
    horizon = ev.window.t_hi
    for i in range(ev.m):
        for j in range(i + 1, ev.m):
            J, tail, zero = difference_integral(ev, i, j, horizon)
            if J > ev.settings.gks_cap:
                return not_applicable(cid, INV_E, f"int |p_{i + 1} - p_{j + 1}| reaches {J:.4g} "
                                      f"> cap {ev.settings.gks_cap:g} by t = {horizon:g}")
            if not zero and tail > 1e-9 * (1 + J):
                return not_applicable(cid, INV_E, f"int |p_{i + 1} - p_{j + 1}| keeps growing "
                                      f"({tail:.3g} over the last period)")
            notes.append(f"int |p_{i + 1} - p_{j + 1}| = {J:.6g} up to t = {horizon:g} "
                         "(monitored, not proved)")
    v = float(sum(betas))
    err = sum(e.error_bound for e in ests)
    spread = sum(e.spread for e in ests)
    return decide(cid, v, err, spread, INV_E, notes, ev.strategy(), {"betas": betas})


@timed
def crit_mono(problem, variant="3.16", settings=None) -> CriterionOutcome:
    """Product criteria for non-decreasing arguments, threshold ``1/m^m``.

    ``3.16``: ``prod_j (prod_i int_{tau_j}^t p_i)^{1/m}``.
    ``3.17``: ``prod_j int_{tau_j}^t p`` with a common minorant ``p <= p_i``.
    ``3.18``: ``p^m limsup prod_i d_i(t)`` with a constant minorant ``p``.
    """
    ev = evaluator(problem, settings)
    st = ev.settings
    m = ev.m
    thr = 1.0 / m ** m
    bad = _monotone_terms(ev)
    if bad:
        return not_applicable(variant, thr, "argument(s) " + ", ".join(str(i + 1) for i in bad)
                              + " not non-decreasing")
    notes = []
    if variant == "3.16":
        parts = [window_integral(ev, i, ev.args[j]) for j in range(m) for i in range(m)]

        def F(t, side=0):
            return np.prod([f(t, side) for f in parts], axis=0) ** (1.0 / m)

        est = ev.limsup(F)
    elif variant == "3.17":
        if st.minorant is not None:
            q = st.minorant
            for i, p in enumerate(ev.coefficients):
                d = combine([p, q], _sub_op, name="gap")
                if d.negative_regions():
                    return not_applicable(variant, thr, f"coefficient {i + 1} drops below "
                                          "the supplied minorant")
            notes.append("minorant supplied by the configuration")
        else:
            try:
                q = pointwise_min(ev.coefficients, name="minorant")
            except Exception as exc:
                return not_applicable(variant, thr, f"common minorant not computable: {exc}")
            notes.append("minorant = pointwise min of the coefficients")
        parts = [window_integral(ev, 0, ev.args[j], coefficient=q) for j in range(m)]

        def F(t, side=0):
            return np.prod([f(t, side) for f in parts], axis=0)

        est = ev.limsup(F)
    elif variant == "3.18":
        def F(t, side=0):
            return np.prod([a.delay.values(t, side) for a in ev.args], axis=0)

        prod = ev.limsup(F, left_limits=True)
        tail_inf = min(float(p.bounds(p.regime_start, None)[0]) for p in ev.coefficients)
        if st.minorant_const is not None:
            c = float(st.minorant_const)
            value = c ** m * prod.estimate
            details = {"minorant": c, "delay_product": prod.estimate}
            if tail_inf < c:
                return not_applicable(variant, thr, f"coefficients drop to {tail_inf:g} < p = {c:g}; "
                                      "a constant minorant is required", value=value,
                                      error_bound=floor_error(value, c ** m * prod.error_bound),
                                      strategy_used=ev.strategy(), details=details)
        else:
            c = tail_inf
            value = c ** m * prod.estimate
            details = {"minorant": c, "delay_product": prod.estimate}
            notes.append(f"constant minorant p = {c:g} from the coefficient bounds")
        return decide(variant, value, c ** m * prod.error_bound, c ** m * prod.spread, thr,
                      notes + prod.notes, ev.strategy(), details)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return decide(variant, est.estimate, est.error_bound, est.spread, thr, notes + est.notes,
                  ev.strategy(), tail_details(est))
