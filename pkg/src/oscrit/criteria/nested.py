"""Nested exponential limsup criteria for several non-monotone arguments.

``crit_T31`` and ``crit_T32`` use the cached P/Q layers.  Their one-term
forms ``crit_C`` and ``crit_3_15`` are computed by direct quadrature on
purpose, so that agreement between the two paths is a real check.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import NoRealRoot
from ..quadrature import integrate_batch
from .classical import evaluator, single_term_required, tail_details, timed, window_integral
from .context import Evaluator, product_value
from .lambda_star import INV_E, lambda_star
from .outcome import (OSCILLATORY, CriterionOutcome, decide, exceeds, floor_error)

SWEEP_EPSILONS = (1e-2, 1e-4, 1e-6)


def _cache_error(values, delta):
    """Error of ``int p exp(W)`` when ``W`` carries up to ``2*delta`` of table error."""
    return np.abs(values) * math.expm1(2 * delta)


def t31_functional(ev: Evaluator, inner=None):
    layers = ev.layers(inner)
    Q = layers.Q
    delta = Q.max_error
    m = ev.m
    pairs = [(i, j) for j in range(m) for i in range(m)]
    bps = ev.integration_breakpoints(with_layers=layers.inner)

    def F(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Qs = [Q(ev.sigma(i, t)) for i in range(m)]

        def weight(i, own, s):
            return Qs[i][own] - Q(ev.tau(i, s))

        v, e = ev.weighted_integrals(t, pairs, weight, bps=bps)
        e = e + _cache_error(v, delta)
        return product_value(v, e, m)

    return F


def _note_inner(ev, inner):
    inner = inner or ev.settings.inner_delay
    if inner == "minorant":
        return ["inner delay replaced by its minimum (lower bound)"]
    return []


@timed
def crit_T31(problem, settings=None, inner=None) -> CriterionOutcome:
    """Double-product nested criterion with threshold ``1/m^m``."""
    ev = evaluator(problem, settings)
    thr = 1.0 / ev.m ** ev.m
    est = ev.limsup(t31_functional(ev, inner))
    return decide("3.2", est.estimate, est.error_bound, est.spread, thr,
                  _note_inner(ev, inner) + est.notes, ev.strategy(), tail_details(est))


# ----------------------------------------------------------------------
# lambda* inputs


def lambda_inputs(ev: Evaluator):
    """Per-term liminf constants and the roots ``lambda_i*``.

    Returns ``(lams, betas, notes, short_circuit)``; ``short_circuit`` is
    the index of a term whose liminf clears ``1/e`` for a single term.
    """
    lams, betas, notes = [], [], []
    short = None
    for i in range(ev.m):
        est = ev.liminf(window_integral(ev, i, ev.args[i]))
        b = est.estimate
        betas.append(b)
        err = floor_error(b, est.error_bound)
        if b > INV_E:
            if exceeds(b, INV_E, err, est.spread):
                if ev.m == 1:
                    short = i
                else:
                    notes.append(f"term {i + 1}: liminf {b:.6g} > 1/e, weight capped at e")
            lams.append(math.e)
            continue
        try:
            lams.append(lambda_star(max(b, 0.0)).lam)
        except NoRealRoot:
            lams.append(math.e)
    return lams, betas, notes, short


def default_epsilon(lams):
    return 1e-6 * min(lams)


def t32_functional(ev: Evaluator, weights):
    m = ev.m
    pairs = [(i, j) for j in range(m) for i in range(m)]
    bps = ev.integration_breakpoints()
    w = np.asarray(weights, dtype=float)

    def combo(x):
        return sum(w[k] * ev.P(k, x) for k in range(m))

    def F(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        head = [combo(ev.sigma(i, t)) for i in range(m)]

        def weight(i, own, s):
            return head[i][own] - combo(ev.tau(i, s))

        v, e = ev.weighted_integrals(t, pairs, weight, bps=bps)
        return product_value(v, e, m)

    return F


def _short_circuit(cid, thr, ev, betas):
    return CriterionOutcome(cid, math.nan, 0.0, thr, OSCILLATORY,
                            [f"liminf int_tau^t p = {betas[0]:.10g} > 1/e; oscillation "
                             "follows from (2.2) directly"],
                            ev.strategy(), 0.0, {"via": "2.2", "betas": betas})


def _eps_run(ev, cid, thr, make_F, lams, betas, notes, epsilon):
    eps = ev.settings.epsilon if epsilon is None else epsilon
    if eps is None:
        eps = default_epsilon(lams)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    est = ev.limsup(make_F([l - eps for l in lams]))
    details = {**tail_details(est), "epsilon": eps, "lambda_star": lams, "betas": betas}
    notes = list(notes) + est.notes
    if ev.settings.eps_sweep:
        sweep = {}
        for e in SWEEP_EPSILONS:
            sweep[repr(e)] = ev.limsup(make_F([l - e for l in lams])).estimate
        vals = [sweep[repr(e)] for e in SWEEP_EPSILONS]
        mono = all(b >= a - 1e-9 * (1 + abs(a)) for a, b in zip(vals, vals[1:]))
        details["eps_sweep"] = sweep
        notes.append("eps sweep " + ("increases monotonically as eps -> 0" if mono
                                     else "is not monotone in eps"))
    return decide(cid, est.estimate, est.error_bound, est.spread, thr, notes,
                  ev.strategy(), details)


@timed
def crit_T32(problem, settings=None, epsilon=None) -> CriterionOutcome:
    """Product criterion with ``(lambda_i* - eps)``-weighted exponents."""
    ev = evaluator(problem, settings)
    thr = 1.0 / ev.m ** ev.m
    lams, betas, notes, short = lambda_inputs(ev)
    if short is not None:
        return _short_circuit("3.13", thr, ev, betas)
    return _eps_run(ev, "3.13", thr, lambda w: t32_functional(ev, w), lams, betas, notes,
                    epsilon)


# ----------------------------------------------------------------------
# one-term forms by direct quadrature


def c_functional(ev: Evaluator, inner=None):
    """Triple-nested integrand; the middle integral is recomputed at every node."""
    inner = inner or ev.settings.inner_delay
    P = lambda x: ev.P(0, x)
    p = lambda x: ev.p(0, x)
    tau = lambda x: ev.tau(0, x)
    tol = ev.settings.tol
    d_fn = ev.args[0].delay
    dmin = float(d_fn.bounds(d_fn.regime_start, None)[0])
    if inner == "minorant":
        arg = lambda x: x - dmin
    else:
        arg = tau
    w = ev.window
    lo = w.t_lo - 3 * w.d_max - 2
    lo = max(lo, float(d_fn.t0) + w.d_max)
    hi = ev.t_max + 1
    coef = ev.coefficients[0]
    base = np.concatenate([coef.breakpoints(lo, hi), d_fn.breakpoints(lo, hi)])
    tb = coef.breakpoints(max(float(coef.t0), lo - w.d_max - 1), hi)
    shifted = tb + dmin if inner == "minorant" else ev.args[0].preimages(tb, lo, hi)
    middle_bps = np.unique(np.concatenate([base, shifted]))
    outer_bps = np.unique(np.concatenate([middle_bps, ev.args[0].preimages(middle_bps, lo, hi)]))

    def q(xi, _own):
        return p(xi) * np.exp(P(xi) - P(arg(xi)))

    def F(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        sig = ev.sigma(0, t)
        worst = [0.0]

        def outer(s, own):
            mid = integrate_batch(q, tau(s), sig[own], tol / 10, middle_bps)
            worst[0] = max(worst[0], float(mid.errors.max()) if len(mid.errors) else 0.0)
            return p(s) * np.exp(mid.values)

        res = integrate_batch(outer, sig, t, tol, outer_bps)
        err = res.errors + np.abs(res.values) * math.expm1(worst[0])
        return res.values, err

    return F


@timed
def crit_C(problem, settings=None, inner=None) -> CriterionOutcome:
    """One-term doubly exponential limsup test (threshold 1)."""
    ev = evaluator(problem, settings)
    if ev.m != 1:
        return single_term_required("3.14", 1.0)
    est = ev.limsup(c_functional(ev, inner))
    return decide("3.14", est.estimate, est.error_bound, est.spread, 1.0,
                  _note_inner(ev, inner) + est.notes, ev.strategy(), tail_details(est))


def f315_functional(ev: Evaluator, weight):
    """``int_{sigma(t)}^t p(s) exp(weight * int_{tau(s)}^{sigma(t)} p) ds``."""
    coef = ev.coefficients[0]
    arg = ev.args[0]
    w = ev.window
    lo = max(float(coef.t0), w.t_lo - 3 * w.d_max - 2)
    hi = ev.t_max + 1
    bps = np.concatenate([coef.breakpoints(lo, hi), arg.delay.breakpoints(lo, hi)])
    bps = np.unique(np.concatenate([bps, arg.preimages(coef.breakpoints(lo, hi), lo, hi)]))

    def F(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        head = coef.antiderivative(ev.sigma(0, t))

        def f(s, own):
            return coef.values(s) * np.exp(weight * (head[own] - coef.antiderivative(arg.tau(s))))

        res = integrate_batch(f, ev.sigma(0, t), t, ev.settings.tol, bps)
        return res.values, res.errors

    return F


@timed
def crit_3_15(problem, settings=None, epsilon=None) -> CriterionOutcome:
    """One-term ``(lambda* - eps)`` weighted limsup test (threshold 1)."""
    ev = evaluator(problem, settings)
    if ev.m != 1:
        return single_term_required("3.15", 1.0)
    lams, betas, notes, short = lambda_inputs(ev)
    if short is not None:
        return _short_circuit("3.15", 1.0, ev, betas)
    return _eps_run(ev, "3.15", 1.0, lambda w: f315_functional(ev, w[0]), lams, betas, notes,
                    epsilon)
