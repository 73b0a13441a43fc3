"""Shared evaluation state for the criteria of one problem.

The :class:`Evaluator` decides the sampling window, builds the nested
layer caches once, and turns a vectorized functional into a tail
estimate according to the configured sampling mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .. import asymptotics as asy
from ..errors import IncommensuratePeriods
from ..funcmodel import (Candidates, DelayArg, PiecewiseFn, Problem, common_period,
                         envelope_of, pointwise_max, pointwise_min)
from ..quadrature import DEFAULT_TOL, NestedLayers, integrate_batch

SAMPLING_MODES = ("supplement", "grid", "candidates", "periodic_exact")


@dataclass(frozen=True)
class Settings:
    """Numerical knobs shared by every criterion."""

    tol: float = DEFAULT_TOL
    horizon: Optional[float] = None
    sampling: str = "supplement"
    samples_per_period: int = 400
    tail_fraction: float = asy.DEFAULT_TAIL_FRACTION
    grid_points: int = 2000
    refine: bool = True
    inner_delay: str = "exact"
    epsilon: Optional[float] = None
    eps_sweep: bool = False
    ls_symmetric: bool = False
    gks_cap: float = 1e3
    minorant: Optional[PiecewiseFn] = None
    minorant_const: Optional[float] = None
    candidates: Optional[Candidates] = None

    def with_(self, **kw) -> "Settings":
        return replace(self, **kw)


@dataclass
class Window:
    t_lo: float
    t_hi: float
    period: Optional[float]
    periodic: bool
    regime_start: float
    d_max: float
    notes: list = field(default_factory=list)


class Evaluator:
    """Caches and sampling plan for one :class:`Problem`."""

    def __init__(self, problem: Problem, settings: Optional[Settings] = None):
        self.problem = problem
        self.settings = settings or Settings()
        self.m = problem.m
        self.coefficients = problem.coefficients
        self.args = problem.args
        self.sigmas = [problem.envelope(i) for i in range(self.m)]
        self._layers = {}
        self._bps = {}
        self._fk = None
        self.window = self._plan()

    # ------------------------------------------------------------------
    # structure

    def fk_arguments(self):
        """(tau^*, tau_*) for the Fukagai-Kusano test.

        ``tau^*`` is the sup-envelope of ``max_i tau_i`` (lag ``min_i d_i``);
        ``tau_*`` is ``min_i tau_i`` (lag ``max_i d_i``).  Either may be
        None when the delays are not piecewise affine.
        """
        if self._fk is None:
            delays = [a.delay for a in self.args]
            upper = lower = None
            try:
                lag_min = pointwise_min(delays, name="min_d")
                upper = envelope_of(DelayArg(lag_min, name="max_tau"))
            except Exception:  # curved pieces or incompatible tails
                upper = None
            try:
                lower = DelayArg(pointwise_max(delays, name="max_d"), name="min_tau")
            except Exception:
                lower = None
            self._fk = (upper, lower)
        return self._fk

    def _functions(self):
        fns = list(self.coefficients) + [a.delay for a in self.args] + [s.lag for s in self.sigmas]
        if self.settings.minorant is not None:
            fns.append(self.settings.minorant)
        return fns

    def _plan(self) -> Window:
        st = self.settings
        fns = self._functions()
        upper, lower = self.fk_arguments()
        for extra in (upper, lower):
            if extra is not None:
                fns.append(extra.delay)
        regime = float(max(f.regime_start for f in fns))
        d_max = max(float(a.delay.bounds()[1]) for a in self.args)
        notes = []
        if not math.isfinite(d_max):
            # growing delays: fall back to the sup over a finite stretch
            d_max = max(float(a.delay.bounds(a.delay.t0, regime + 10)[1]) for a in self.args)
            notes.append("delay is unbounded; window sized from a finite stretch")
        w0 = regime + 3 * max(d_max, 0.0) + (1.0 if d_max == 0 else 0.0)
        periodic = all(f.is_eventually_periodic for f in fns)
        P = None
        if periodic:
            try:
                Pf = common_period(f.period for f in fns if f.period is not None)
                P = float(Pf) if Pf is not None else max(1.0, d_max)
            except IncommensuratePeriods as exc:
                notes.append(f"{exc}; using grid sampling")
                periodic = False
        if st.sampling == "grid":
            periodic = False
        if periodic:
            t_lo, t_hi = w0, w0 + 2 * P
            if st.horizon is not None:
                if st.horizon - 2 * P >= w0:
                    t_lo, t_hi = st.horizon - 2 * P, st.horizon
                else:
                    notes.append(f"horizon {st.horizon:g} lies inside the transient; "
                                 f"using [{t_lo:g}, {t_hi:g}]")
        else:
            if st.sampling == "periodic_exact":
                notes.append("data not eventually periodic; periodic_exact replaced by grid")
            span = max(40 * max(d_max, 1.0), 20 * (P or 1.0))
            t_lo = w0
            t_hi = st.horizon if st.horizon is not None and st.horizon > w0 else w0 + span
        return Window(t_lo, t_hi, P, periodic, regime, d_max, notes)

    # ------------------------------------------------------------------
    # primitive evaluations

    @property
    def t_max(self) -> float:
        """Largest time any functional is evaluated at."""
        cand = self.candidate_points()
        hi = self.window.t_hi
        return hi if cand is None else max(hi, float(cand.max()))

    def P(self, i, t):
        return self.coefficients[i].antiderivative(t)

    def p(self, i, t, side=0):
        return self.coefficients[i].values(t, side)

    def tau(self, i, t, side=0):
        return self.args[i].tau(t, side)

    def sigma(self, i, t, side=0):
        return self.sigmas[i].sigma(t, side)

    def layers(self, inner: Optional[str] = None) -> NestedLayers:
        inner = inner or self.settings.inner_delay
        if inner not in self._layers:
            w = self.window
            lag_max = max(float(s.lag.bounds(s.lag.regime_start, None)[1]) for s in self.sigmas)
            lag_max = max(lag_max, float(max(s.lag.bounds()[1] for s in self.sigmas)))
            lo = w.t_lo - lag_max - 2 * w.d_max - 1.0
            lo = max(lo, float(max(a.delay.t0 for a in self.args)) + w.d_max)
            dmin = [float(a.delay.bounds(a.delay.regime_start, None)[0]) for a in self.args]
            self._layers[inner] = NestedLayers(self.coefficients, self.args, lo, self.t_max + 1.0,
                                               tol=self.settings.tol / 10, inner=inner,
                                               dmin=dmin)
        return self._layers[inner]

    def integration_breakpoints(self, with_layers: Optional[str] = None) -> np.ndarray:
        """Kinks of any integrand in s over the sampling window."""
        key = with_layers or "-"
        if key not in self._bps:
            w = self.window
            lo = w.t_lo - 3 * w.d_max - 2.0
            lo = max(lo, float(max(f.t0 for f in self.coefficients)))
            hi = self.t_max + 1.0
            base = [f.breakpoints(lo, hi) for f in self.coefficients]
            base += [a.delay.breakpoints(lo, hi) for a in self.args]
            base = np.unique(np.concatenate(base)) if base else np.array([])
            targets = base
            if with_layers is not None:
                targets = np.unique(np.concatenate([base, self.layers(with_layers).kinks(lo, hi)]))
            pre = [a.preimages(targets, lo, hi) for a in self.args]
            self._bps[key] = np.unique(np.concatenate([base] + pre))
        return self._bps[key]

    # ------------------------------------------------------------------
    # sampling

    def _event_points(self) -> np.ndarray:
        """Breakpoints in the window and their depth-2 preimages."""
        w = self.window
        lo, hi = w.t_lo, w.t_hi
        fns = self._functions()
        upper, lower = self.fk_arguments()
        args = list(self.args) + list(self.sigmas)
        args += [a for a in (upper, lower) if a is not None]
        ext_lo = max(lo - 3 * w.d_max - 1, float(max(f.t0 for f in fns)))
        bps = np.unique(np.concatenate([f.breakpoints(ext_lo, hi) for f in fns]))
        pts = [bps]
        layer = bps
        for _ in range(2):
            nxt = [a.preimages(layer, ext_lo, hi) for a in args]
            layer = np.unique(np.concatenate(nxt)) if nxt else np.array([])
            pts.append(layer)
        allp = np.unique(np.concatenate(pts))
        return allp[(allp >= lo) & (allp <= hi)]

    def base_points(self) -> np.ndarray:
        w = self.window
        st = self.settings
        if w.periodic:
            k = st.samples_per_period
            one = w.t_lo + w.period * np.arange(k) / k
            uni = np.concatenate([one, one + w.period, [w.t_hi]])
            ev = self._event_points()
            # mirror events so both periods see the same phases
            ev = np.concatenate([ev, ev + w.period, ev - w.period])
        else:
            uni = np.linspace(w.t_lo, w.t_hi, max(st.grid_points, 100))
            ev = self._event_points()
        ev = ev[(ev >= w.t_lo) & (ev <= w.t_hi)]
        return np.unique(np.concatenate([uni, ev]))

    def base_tail_fraction(self) -> float:
        return 0.5 if self.window.periodic else self.settings.tail_fraction

    def candidate_points(self) -> Optional[np.ndarray]:
        c = self.settings.candidates or self.problem.candidates
        if c is None:
            return None
        n_from = c.n_from
        need = math.ceil((self.window.regime_start + 3 * self.window.d_max - c.offset) / c.step)
        n_from = max(n_from, need)
        n_to = max(c.n_to, n_from + 19)
        return c.points(n_from, n_to)

    def strategy(self) -> dict:
        w = self.window
        out = {"mode": self.settings.sampling,
               "base": ({"kind": "periodic_exact", "period": w.period,
                         "samples_per_period": self.settings.samples_per_period}
                        if w.periodic else
                        {"kind": "grid", "n": max(self.settings.grid_points, 100)}),
               "window": [w.t_lo, w.t_hi]}
        c = self.settings.candidates or self.problem.candidates
        if c is not None:
            out["candidates"] = {"step": c.step, "offset": c.offset}
        return out

    def _base_estimate(self, F, kind, left_limits):
        w = self.window
        t = self.base_points()
        v, e = asy._evaluate(F, t)
        s = asy.Samples(t, v, e)
        if left_limits:
            ev = self._event_points()
            if len(ev):
                lv, le = asy._evaluate(lambda x: F(x, 1), ev)
                s = s.merged(asy.Samples(ev, lv, le))
        if self.settings.refine:
            extra = asy.refine_extrema(F, s, kind, max_points=8)
            if len(extra) and w.periodic:
                mir = np.concatenate([extra.t + w.period, extra.t - w.period])
                mir = mir[(mir >= w.t_lo) & (mir <= w.t_hi)]
                if len(mir):
                    mv, me = asy._evaluate(F, mir)
                    extra = extra.merged(asy.Samples(mir, mv, me))
            if len(extra):
                s = s.merged(extra)
        frac = self.base_tail_fraction()
        est = asy.estimate_limsup(s, frac) if kind == "max" else asy.estimate_liminf(s, frac)
        return est, s

    def _candidate_estimate(self, F, kind):
        t = self.candidate_points()
        if t is None:
            return None, None
        v, e = asy._evaluate(F, t)
        s = asy.Samples(t, v, e)
        est = asy.estimate_limsup(s, 0.5) if kind == "max" else asy.estimate_liminf(s, 0.5)
        return est, s

    def limsup(self, F: Callable, left_limits: bool = False) -> asy.TailEstimate:
        """limsup of ``F`` according to the sampling mode.

        ``supplement``: the larger of the base and candidate estimates.
        ``candidates``: candidate sequence only (a lower bound for the limsup).
        """
        mode = self.settings.sampling
        if mode == "candidates":
            est, _ = self._candidate_estimate(F, "max")
            if est is not None:
                est.notes.append("limsup taken along the candidate sequence")
                return est
        base, _ = self._base_estimate(F, "max", left_limits)
        if mode in ("supplement", "candidates"):
            cand, _ = self._candidate_estimate(F, "max")
            if cand is not None and cand.estimate > base.estimate:
                cand.notes.append("candidate sequence exceeds the grid maximum")
                return cand
        return base

    def liminf(self, F: Callable, left_limits: bool = False) -> asy.TailEstimate:
        """liminf of ``F`` over the base samples together with any candidates."""
        base, _ = self._base_estimate(F, "min", left_limits)
        if self.settings.sampling != "grid":
            cand, _ = self._candidate_estimate(F, "min")
            if cand is not None and cand.estimate < base.estimate:
                return cand
        return base

    # ------------------------------------------------------------------
    # weighted integrals

    def weighted_integrals(self, t, pairs, weight, lower="sigma", bps=None, tol=None):
        """``int_{lower_j(t)}^{t} p_i(s) exp(weight(i, t, s)) ds`` for (i, j) pairs.

        ``weight(i, owner, s)`` gets the sample index array ``owner``.
        Returns ``(values, errors)`` of shape ``(len(t), len(pairs))``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n, npr = len(t), len(pairs)
        pi = np.array([p[0] for p in pairs])
        pj = np.array([p[1] for p in pairs])
        lo_fn = self.sigma if lower == "sigma" else self.tau
        a = np.empty((n, npr))
        for k, j in enumerate(pj):
            a[:, k] = lo_fn(int(j), t)
        b = np.repeat(t[:, None], npr, axis=1)

        def f(x, own):
            samp = own // npr
            which = pi[own % npr]
            out = np.empty_like(x)
            for i in np.unique(which):
                msk = which == i
                xs = x[msk]
                w = 0.0 if weight is None else weight(int(i), samp[msk], xs)
                out[msk] = self.p(int(i), xs) * np.exp(w)
            return out

        res = integrate_batch(f, a.ravel(), b.ravel(), tol or self.settings.tol, bps)
        return res.values.reshape(n, npr), res.errors.reshape(n, npr)


def product_value(vals, errs, m):
    """``(prod of all entries)^(1/m)`` per row with a two-sided error bound."""
    vals = np.maximum(vals, 0.0)
    v = np.prod(vals, axis=1) ** (1.0 / m)
    up = np.prod(vals + errs, axis=1) ** (1.0 / m)
    dn = np.prod(np.maximum(vals - errs, 0.0), axis=1) ** (1.0 / m)
    return v, np.maximum(up - v, v - dn)
