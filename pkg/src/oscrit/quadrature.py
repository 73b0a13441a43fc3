"""Adaptive Gauss-Legendre quadrature and cumulative-integral caches.

Panels are 7-point Gauss-Legendre rules checked against a 4-point rule on
the same panel; disagreeing panels are bisected.  Many integrals are solved
at once by :func:`integrate_batch`, which refines breadth first so every
refinement pass is a single vectorized integrand call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import CacheMiss, ToleranceNotMet

EVAL_BUDGET = 10_000_000
DEFAULT_TOL = 1e-8
_EPS = np.finfo(float).eps

_x7, _w7 = np.polynomial.legendre.leggauss(7)
_x4, _w4 = np.polynomial.legendre.leggauss(4)
_NODES = np.concatenate([_x7, _x4])
_N7 = len(_x7)


@dataclass(frozen=True)
class IntegralValue:
    """Integral estimate with an absolute error bound."""

    value: float
    error_bound: float
    evaluations: int = 0

    def __iter__(self):
        yield self.value
        yield self.error_bound


@dataclass
class BatchResult:
    values: np.ndarray
    errors: np.ndarray
    evaluations: int


def _initial_panels(a, b, breakpoints):
    """Split each [a_i, b_i] at interior breakpoints."""
    lo_list, hi_list, own_list = [], [], []
    if breakpoints is None or len(breakpoints) == 0:
        return a.copy(), b.copy(), np.arange(len(a))
    bps = np.asarray(breakpoints, dtype=float)
    i0 = np.searchsorted(bps, a, side="right")
    i1 = np.searchsorted(bps, b, side="left")
    counts = np.maximum(i1 - i0, 0)
    if not counts.any():
        return a.copy(), b.copy(), np.arange(len(a))
    for k in range(len(a)):
        cuts = bps[i0[k]:i1[k]]
        edges = np.concatenate([[a[k]], cuts, [b[k]]])
        lo_list.append(edges[:-1])
        hi_list.append(edges[1:])
        own_list.append(np.full(len(edges) - 1, k))
    return np.concatenate(lo_list), np.concatenate(hi_list), np.concatenate(own_list)


def integrate_batch(f: Callable, a, b, tol, breakpoints=None,
                    budget: int = EVAL_BUDGET) -> BatchResult:
    """Integrate ``f(x, owner)`` over each ``[a_i, b_i]``.

    Parameters
    ----------
    f : callable
        Vectorized integrand; ``owner`` holds the index of the integral each
        abscissa belongs to, so the integrand may depend on it.
    a, b : array_like
        Limits with ``a <= b``.
    tol : float or array_like
        Absolute tolerance per integral, shared between panels in
        proportion to their length.
    breakpoints : array_like, optional
        Sorted points where the integrand may be non-smooth; panels never
        straddle them.

    Raises
    ------
    ToleranceNotMet
        When the evaluation budget runs out; ``.best`` holds the partial
        :class:`BatchResult`.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = len(a)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n,))
    if np.any(b < a):
        raise ValueError("integrate_batch needs a <= b")
    total = np.zeros(n)
    err = np.zeros(n)
    lo, hi, own = _initial_panels(a, b, breakpoints)
    span = np.where(b > a, b - a, 1.0)
    ptol = tol[own] * (hi - lo) / span[own]
    keep = hi > lo
    lo, hi, own, ptol = lo[keep], hi[keep], own[keep], ptol[keep]
    evals = 0
    while len(lo):
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        x = c[:, None] + r[:, None] * _NODES[None, :]
        fx = np.asarray(f(x.ravel(), np.repeat(own, len(_NODES))), dtype=float)
        fx = fx.reshape(x.shape)
        evals += fx.size
        g7 = r * (fx[:, :_N7] @ _w7)
        g4 = r * (fx[:, _N7:] @ _w4)
        floor = 8 * _EPS * r * (np.abs(fx[:, :_N7]) @ _w7) + 1e-300
        diff = np.abs(g7 - g4)
        tiny = r < 1e-13 * np.maximum(1.0, np.abs(c))
        done = (diff <= ptol) | (diff <= 4 * floor) | tiny | ~np.isfinite(diff)
        np.add.at(total, own[done], g7[done])
        np.add.at(err, own[done], diff[done] + floor[done])
        if evals > budget and not done.all():
            rest = ~done
            np.add.at(total, own[rest], g7[rest])
            np.add.at(err, own[rest], diff[rest] + floor[rest])
            raise ToleranceNotMet("quadrature budget exhausted",
                                  best=BatchResult(total, err, evals))
        rest = ~done
        lo, hi, own, ptol, c = lo[rest], hi[rest], own[rest], ptol[rest], c[rest]
        lo, hi = np.concatenate([lo, c]), np.concatenate([c, hi])
        own = np.concatenate([own, own])
        ptol = np.concatenate([ptol, ptol]) / 2
    return BatchResult(total, err, evals)


def integrate(f: Callable, a: float, b: float, tol: float = DEFAULT_TOL,
              breakpoints=None, budget: int = EVAL_BUDGET) -> IntegralValue:
    """Adaptive integral of a vectorized one-argument function over [a, b].

    >>> integrate(lambda s: s, 0.0, 1.0).value
    0.5
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return IntegralValue(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    try:
        res = integrate_batch(lambda x, _o: f(x), [a], [b], tol, breakpoints, budget)
    except ToleranceNotMet as exc:
        best = exc.best
        raise ToleranceNotMet(str(exc), best=IntegralValue(
            sign * float(best.values[0]), float(best.errors[0]), best.evaluations)) from None
    return IntegralValue(sign * float(res.values[0]), float(res.errors[0]), res.evaluations)


# ----------------------------------------------------------------------
# cumulative integral tables


class CumulativeFn:
    """Tabulated ``C(t) = int_{t0}^{t} f`` with cubic Hermite interpolation.

    ``knots`` are aligned to integrand kinks, slopes are the one-sided
    integrand values, and ``interval_error[i]`` bounds the interpolation
    error on interval ``i``.  ``quad_error`` is the accumulated quadrature
    error at each knot.
    """

    def __init__(self, knots, values, slope_left, slope_right, interval_error, quad_error):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slope_left = np.asarray(slope_left, dtype=float)
        self.slope_right = np.asarray(slope_right, dtype=float)
        self.interval_error = np.asarray(interval_error, dtype=float)
        self.quad_error = np.asarray(quad_error, dtype=float)
        self.t0 = float(self.knots[0])
        self.T = float(self.knots[-1])
        # a relative slack so the ends themselves are always in range
        self._slack = 1e-12 * max(1.0, abs(self.t0), abs(self.T))

    def covers(self, a, b) -> bool:
        return a >= self.t0 - self._slack and b <= self.T + self._slack

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < self.t0 - self._slack or t.max() > self.T + self._slack):
            raise CacheMiss(f"query [{t.min():.6g}, {t.max():.6g}] outside table "
                            f"[{self.t0:.6g}, {self.T:.6g}]")
        tc = np.clip(t.ravel(), self.t0, self.T)
        out = _backend.hermite_eval(self.knots, self.values, self.slope_left,
                                    self.slope_right, tc)
        return out.reshape(t.shape)

    def error_at(self, t) -> np.ndarray:
        """Error bound of the table at ``t``."""
        t = np.clip(np.asarray(t, dtype=float), self.t0, self.T)
        i = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        return self.interval_error[i] + np.maximum(self.quad_error[i], self.quad_error[i + 1])

    @property
    def max_error(self) -> float:
        return float(self.interval_error.max() + self.quad_error.max())


def cumulative_table(f: Callable, t0: float, T: float, tol: float = DEFAULT_TOL,
                     kinks=None, f_left: Optional[Callable] = None,
                     max_knots: int = 2_000_000) -> CumulativeFn:
    """Cumulative integral table of ``f`` on ``[t0, T]``.

    Parameters
    ----------
    f : callable
        Vectorized integrand, right-continuous at kinks.
    tol : float
        Target bound on ``|C(t) - int_{t0}^t f|`` over the whole range.
    kinks : array_like, optional
        Points where ``f`` is non-smooth; they become knots.
    f_left : callable, optional
        Left limits of ``f``; defaults to evaluating one ulp to the left.
    """
    if not T > t0:
        raise ValueError("cumulative_table needs T > t0")
    if f_left is None:
        def f_left(x):
            return f(np.nextafter(x, -np.inf))
    base = [t0, T]
    if kinks is not None:
        k = np.asarray(kinks, dtype=float)
        base += k[(k > t0) & (k < T)].tolist()
    knots = np.unique(np.array(base))
    # start from a modest uniform spacing inside every kink interval
    h0 = (T - t0) / 64
    pieces = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        nsub = max(1, int(math.ceil((hi - lo) / h0)))
        pieces.append(np.linspace(lo, hi, nsub + 1)[:-1])
    knots = np.concatenate(pieces + [[T]])
    span = T - t0

    def own_f(x, _o):
        return f(x)

    for _ in range(60):
        lo, hi = knots[:-1], knots[1:]
        mid = 0.5 * (lo + hi)
        h = hi - lo
        share = h / span
        full = integrate_batch(own_f, lo, hi, 0.25 * tol * share)
        half = integrate_batch(own_f, lo, mid, 0.25 * tol * share)
        C = np.concatenate([[0.0], np.cumsum(full.values)])
        qerr = np.concatenate([[0.0], np.cumsum(full.errors)])
        sl = np.asarray(f(lo), dtype=float)
        sr = np.asarray(f_left(hi), dtype=float)
        if np.all(sl >= 0) and np.all(sr >= 0):
            sl, sr = _fritsch_carlson(full.values / h, sl, sr)
        Hmid = _backend.hermite_eval(knots, C, sl, sr, mid)
        disc = np.abs(Hmid - (C[:-1] + half.values))
        ierr = 2.0 * disc + half.errors + 8 * _EPS * (np.abs(C[:-1]) + np.abs(C[1:]))
        bad = ierr > 0.5 * tol
        if not bad.any():
            return CumulativeFn(knots, C, sl, sr, ierr, qerr)
        if len(knots) + bad.sum() > max_knots:
            break
        knots = np.sort(np.concatenate([knots, mid[bad]]))
    best = CumulativeFn(knots, C, sl, sr, ierr, qerr)
    raise ToleranceNotMet("cumulative table did not reach tolerance", best=best)


def _fritsch_carlson(delta, sl, sr):
    """Limit end slopes so each Hermite cubic stays monotone."""
    sl = sl.copy()
    sr = sr.copy()
    pos = delta > 0
    zero = ~pos
    sl[zero] = 0.0
    sr[zero] = 0.0
    al = np.where(pos, sl / np.where(pos, delta, 1), 0)
    be = np.where(pos, sr / np.where(pos, delta, 1), 0)
    r2 = al * al + be * be
    fix = pos & (r2 > 9)
    scale = np.where(fix, 3 / np.sqrt(np.where(fix, r2, 1)), 1.0)
    return sl * scale, sr * scale


# ----------------------------------------------------------------------
# nested exponent layers


class NestedLayers:
    """The two inner layers of the nested criteria.

    P-layer: ``S(t) = int sum_k p_k`` from exact antiderivatives.
    Q-layer: ``Q(t) = int sum_k p_k(xi) exp(S(xi) - S(arg_k(xi))) dxi``
    tabulated by :func:`cumulative_table`, where ``arg_k`` is ``tau_k``
    (``inner="exact"``) or ``xi - min d_k`` (``inner="minorant"``).  The
    minorant variant is a lower bound for the exact layer.

    Parameters
    ----------
    coefficients : list of PiecewiseFn
    args : list of DelayArg
    lo, hi : float
        Range the Q table must cover.
    tol : float
        Q table tolerance.
    inner : {"exact", "minorant"}
    """

    def __init__(self, coefficients, args, lo, hi, tol=DEFAULT_TOL / 10, inner="exact",
                 dmin=None):
        from .funcmodel import Bank, fn_sum
        self.coefficients = list(coefficients)
        self.args = list(args)
        self.inner = inner
        self.total = fn_sum(self.coefficients, name="sum_p")
        self._bank = Bank(self.coefficients + [self.total])
        self.m = len(self.coefficients)
        self.lo, self.hi = float(lo), float(hi)
        self.tol = tol
        if dmin is None:
            dmin = [a.delay.bounds(a.delay.regime_start, None)[0] for a in self.args]
        self.dmin = [float(v) for v in dmin]
        self._Q = None

    # P-layer --------------------------------------------------------
    def S(self, t) -> np.ndarray:
        return self._bank.antideriv(self.m, np.asarray(t, dtype=float))

    def P(self, k, t) -> np.ndarray:
        return self._bank.antideriv(k, np.asarray(t, dtype=float))

    def p(self, k, t, side=0) -> np.ndarray:
        return self._bank.eval(k, np.asarray(t, dtype=float), side)

    # Q-layer --------------------------------------------------------
    def inner_arg(self, k, xi, side=0) -> np.ndarray:
        if self.inner == "minorant":
            return xi - self.dmin[k]
        return self.args[k].tau(xi, side)

    def q(self, xi, side=0) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        Sx = self.S(xi)
        out = np.zeros_like(xi)
        for k in range(self.m):
            out += self.p(k, xi, side) * np.exp(Sx - self.S(self.inner_arg(k, xi, side)))
        return out

    def kinks(self, lo, hi) -> np.ndarray:
        pts = [self.total.breakpoints(lo, hi)]
        tb = self.total.breakpoints(max(float(self.total.t0), lo - 50), hi)
        for k, (p, a) in enumerate(zip(self.coefficients, self.args)):
            pts.append(p.breakpoints(lo, hi))
            pts.append(a.delay.breakpoints(lo, hi))
            if self.inner == "minorant":
                pts.append(tb + self.dmin[k])
            else:
                pts.append(a.preimages(tb, lo, hi))
        allp = np.unique(np.concatenate(pts))
        return allp[(allp > lo) & (allp < hi)]

    @property
    def Q(self) -> CumulativeFn:
        if self._Q is None:
            self._Q = cumulative_table(lambda x: self.q(x), self.lo, self.hi, self.tol,
                                       kinks=self.kinks(self.lo, self.hi),
                                       f_left=lambda x: self.q(x, 1))
        return self._Q


def nested_exponent(layers: NestedLayers, layer: str, a, b) -> IntegralValue:
    """``int_a^b`` of the P- or Q-layer integrand from the caches."""
    if layer in ("P", "P-layer"):
        v = float(layers.S(np.array([b]))[0] - layers.S(np.array([a]))[0])
        return IntegralValue(v, 4 * _EPS * (abs(v) + 1), 0)
    if layer in ("Q", "Q-layer"):
        Q = layers.Q
        if not Q.covers(min(a, b), max(a, b)):
            raise CacheMiss(f"[{a}, {b}] outside Q table [{Q.t0}, {Q.T}]")
        va, vb = Q(np.array([a, b], dtype=float))
        e = Q.error_at(np.array([a, b], dtype=float)).sum()
        return IntegralValue(float(vb - va), float(e), 0)
    raise ValueError(f"unknown layer {layer!r}")
