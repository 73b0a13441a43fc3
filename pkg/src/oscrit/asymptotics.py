"""Tail estimates of limsup / liminf for eventually periodic functionals.

A functional ``F`` maps an array of times to ``(values, errors)``.  Samples
are drawn from a :class:`SamplingStrategy`, local extrema are polished with
a bounded scalar search, and the extremum over the final window is compared
with the one over the window before it.  Their disagreement is the
``spread`` consumed by the verdict margin rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import EvaluationFailed, InsufficientSamples, OscritError

MIN_TAIL_SAMPLES = 10
STABILITY_RTOL = 1e-6
DEFAULT_TAIL_FRACTION = 0.3


@dataclass(frozen=True)
class SamplingStrategy:
    """Where a functional is sampled.

    ``grid``: ``n`` equispaced points on ``[t_start, t_end]``.
    ``candidates``: ``t_n = step*n + offset`` for ``n_from <= n <= n_to``.
    ``periodic_exact``: ``samples_per_period`` points in each of the two
    periods ending at ``t_end``.
    """

    mode: str
    t_start: float = 0.0
    t_end: float = 0.0
    n: int = 0
    step: float = 0.0
    offset: float = 0.0
    n_from: int = 0
    n_to: int = 0
    period: float = 0.0
    samples_per_period: int = 0

    def __post_init__(self):
        if self.mode == "grid" and self.n < 100:
            raise ValueError("grid sampling needs at least 100 points")
        if self.mode == "periodic_exact" and not self.period > 0:
            raise ValueError("periodic_exact sampling needs a positive period")
        if self.mode not in ("grid", "candidates", "periodic_exact"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @classmethod
    def grid(cls, t_start, t_end, n):
        return cls("grid", t_start=float(t_start), t_end=float(t_end), n=int(n))

    @classmethod
    def candidates(cls, step, offset, n_from, n_to):
        return cls("candidates", step=float(step), offset=float(offset),
                   n_from=int(n_from), n_to=int(n_to),
                   t_start=float(step * n_from + offset), t_end=float(step * n_to + offset))

    @classmethod
    def periodic(cls, period, samples_per_period, t_end):
        return cls("periodic_exact", period=float(period),
                   samples_per_period=int(samples_per_period), t_end=float(t_end),
                   t_start=float(t_end - 2 * period))

    def points(self) -> np.ndarray:
        if self.mode == "grid":
            return np.linspace(self.t_start, self.t_end, self.n)
        if self.mode == "candidates":
            n = np.arange(self.n_from, self.n_to + 1, dtype=float)
            return self.step * n + self.offset
        k = self.samples_per_period
        one = self.t_start + self.period * np.arange(k) / k
        return np.concatenate([one, one + self.period, [self.t_end]])

    def describe(self) -> dict:
        if self.mode == "grid":
            return {"mode": "grid", "t_start": self.t_start, "t_end": self.t_end, "n": self.n}
        if self.mode == "candidates":
            return {"mode": "candidates", "step": self.step, "offset": self.offset,
                    "n_from": self.n_from, "n_to": self.n_to}
        return {"mode": "periodic_exact", "period": self.period,
                "samples_per_period": self.samples_per_period,
                "t_start": self.t_start, "t_end": self.t_end}


@dataclass
class Samples:
    """Ordered samples of a functional with per-sample error bounds."""

    t: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        return iter(zip(self.t.tolist(), self.values.tolist()))

    def merged(self, other: "Samples") -> "Samples":
        t = np.concatenate([self.t, other.t])
        v = np.concatenate([self.values, other.values])
        e = np.concatenate([self.errors, other.errors])
        order = np.argsort(t, kind="stable")
        return Samples(t[order], v[order], e[order])

    def scaled(self, c: float) -> "Samples":
        return Samples(self.t, c * self.values, abs(c) * self.errors)


@dataclass
class TailEstimate:
    """Extremum of the final window of samples.

    ``spread`` is the disagreement between the final window and the window
    before it (the tail range when there is no earlier window).
    """

    estimate: float
    spread: float
    stabilized: bool
    samples_used: int
    error_bound: float = 0.0
    t_at: float = math.nan
    previous: float = math.nan
    tail_range: float = 0.0
    trend: str = "flat"
    notes: list = field(default_factory=list)


def _evaluate(F: Callable, t: np.ndarray):
    """Call F and normalise the result to (values, errors)."""
    try:
        out = F(t)
    except OscritError:
        raise
    except Exception as exc:  # pinpoint the failing sample
        for ti in np.atleast_1d(t):
            try:
                F(np.array([ti]))
            except Exception:
                raise EvaluationFailed(f"functional failed at t={ti:.12g}: {exc}", t=float(ti)) from exc
        raise
    if isinstance(out, tuple):
        v, e = out
    else:
        v, e = out, np.zeros_like(np.asarray(out, dtype=float))
    v = np.asarray(v, dtype=float).reshape(np.shape(t))
    e = np.broadcast_to(np.asarray(e, dtype=float), v.shape).copy()
    bad = ~np.isfinite(v)
    if bad.any():
        raise EvaluationFailed(f"functional not finite at t={t[bad][0]:.12g}", t=float(t[bad][0]))
    return v, e


def sample_functional(F: Callable, strategy: SamplingStrategy, extra=None) -> Samples:
    """Evaluate ``F`` at the strategy's points (plus optional ``extra`` points)."""
    t = strategy.points()
    if extra is not None and len(extra):
        t = np.unique(np.concatenate([t, np.asarray(extra, dtype=float)]))
    v, e = _evaluate(F, t)
    return Samples(t, v, e)


def _windows(samples: Samples, tail_fraction: float):
    """Boolean masks of the final and the previous time window."""
    t = samples.t
    t_lo, t_hi = float(t[0]), float(t[-1])
    L = tail_fraction * (t_hi - t_lo)
    last = t >= t_hi - L - 1e-12 * max(1.0, abs(t_hi))
    prev = (t >= t_hi - 2 * L - 1e-12 * max(1.0, abs(t_hi))) & ~last
    if 2 * tail_fraction > 1 + 1e-12:
        prev = np.zeros_like(last)
    return last, prev


def _estimate(samples: Samples, tail_fraction: float, sign: float) -> TailEstimate:
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if len(samples) == 0:
        raise InsufficientSamples("no samples")
    last, prev = _windows(samples, tail_fraction)
    n_last = int(last.sum())
    if n_last < MIN_TAIL_SAMPLES:
        raise InsufficientSamples(f"{n_last} samples in the tail window, need {MIN_TAIL_SAMPLES}")
    v = sign * samples.values
    iv = np.nonzero(last)[0]
    k = iv[np.argmax(v[iv])]
    est = float(samples.values[k])
    tail_vals = samples.values[iv]
    tail_range = float(tail_vals.max() - tail_vals.min())
    if prev.any():
        ip = np.nonzero(prev)[0]
        kp = ip[np.argmax(v[ip])]
        previous = float(samples.values[kp])
        spread = abs(est - previous)
        err = max(float(samples.errors[k]), float(samples.errors[kp]))
    else:
        previous = math.nan
        spread = tail_range
        err = float(samples.errors[k])
    stabilized = prev.any() and spread <= STABILITY_RTOL * (1 + abs(est))
    tol = STABILITY_RTOL * (1 + abs(est)) + 2 * err
    if not prev.any():
        trend = "unknown"
    elif est - previous > tol:
        trend = "increasing"
    elif previous - est > tol:
        trend = "decreasing"
    else:
        trend = "flat"
    return TailEstimate(est, float(spread), bool(stabilized), n_last, err,
                        float(samples.t[k]), previous, tail_range, trend)


def estimate_limsup(samples: Samples, tail_fraction: float = DEFAULT_TAIL_FRACTION) -> TailEstimate:
    """Max over the final ``tail_fraction`` of the sampled span.

    Raises
    ------
    InsufficientSamples
        Fewer than ten samples fall in the final window.
    """
    return _estimate(samples, tail_fraction, 1.0)


def estimate_liminf(samples: Samples, tail_fraction: float = DEFAULT_TAIL_FRACTION) -> TailEstimate:
    """Min over the final ``tail_fraction`` of the sampled span."""
    return _estimate(samples, tail_fraction, -1.0)


# ----------------------------------------------------------------------
# refinement


def refine_extrema(F: Callable, samples: Samples, kind: str = "max",
                   xatol: float = 1e-11, max_points: int = 12) -> Samples:
    """Polish interior local extrema with a bounded scalar search.

    Returns the extra samples found (possibly empty).
    """
    sign = 1.0 if kind == "max" else -1.0
    v = sign * samples.values
    t = samples.t
    n = len(t)
    if n < 3:
        return Samples(np.array([]), np.array([]), np.array([]))
    inner = np.arange(1, n - 1)
    peak = inner[(v[inner] >= v[inner - 1]) & (v[inner] >= v[inner + 1])
                 & ((v[inner] > v[inner - 1]) | (v[inner] > v[inner + 1]))]
    if len(peak) == 0:
        return Samples(np.array([]), np.array([]), np.array([]))
    # the highest local extrema first
    peak = peak[np.argsort(-v[peak])][:max_points]
    nt, nv, ne = [], [], []
    for i in peak:
        a, b = float(t[i - 1]), float(t[i + 1])
        if not b > a:
            continue

        def obj(x):
            return -sign * float(_evaluate(F, np.array([x]))[0][0])

        res = minimize_scalar(obj, bounds=(a, b), method="bounded",
                              options={"xatol": xatol * max(1.0, abs(a)), "maxiter": 80})
        x = float(res.x)
        val, err = _evaluate(F, np.array([x]))
        nt.append(x)
        nv.append(float(val[0]))
        ne.append(float(err[0]))
    return Samples(np.array(nt), np.array(nv), np.array(ne))


def tail_extremum(F: Callable, points: np.ndarray, kind: str = "max",
                  tail_fraction: float = DEFAULT_TAIL_FRACTION, refine: bool = True,
                  period: Optional[float] = None) -> tuple:
    """Sample, refine and estimate in one call.

    With ``period`` set, refined points found in one window are mirrored
    into the other so both windows see the same phases.

    Returns ``(TailEstimate, Samples)``.
    """
    t = np.unique(np.asarray(points, dtype=float))
    v, e = _evaluate(F, t)
    s = Samples(t, v, e)
    if refine:
        extra = refine_extrema(F, s, kind)
        if len(extra):
            if period:
                lo, hi = float(t[0]), float(t[-1])
                mirrored = np.concatenate([extra.t + period, extra.t - period])
                mirrored = mirrored[(mirrored >= lo) & (mirrored <= hi)]
                if len(mirrored):
                    mv, me = _evaluate(F, mirrored)
                    extra = extra.merged(Samples(mirrored, mv, me))
            s = s.merged(extra)
    est = estimate_limsup(s, tail_fraction) if kind == "max" else estimate_liminf(s, tail_fraction)
    return est, s
