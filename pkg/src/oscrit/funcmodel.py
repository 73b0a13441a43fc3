"""Piecewise-polynomial coefficient and delay functions.

Every coefficient ``p_i`` and every delay amount ``d_i(t) = t - tau_i(t)`` of

    x'(t) + sum_i p_i(t) x(tau_i(t)) = 0

is a :class:`PiecewiseFn`: finitely many polynomial pieces on ``[t0, T)``
followed either by a periodic pattern or by a single affine tail.
Breakpoints and coefficients are stored as exact rationals; floating point
only enters through the flat kernel bank used for fast evaluation.

Retarded arguments are :class:`DelayArg` objects wrapping a delay amount and
their sup-envelopes ``sigma(t) = sup_{s<=t} tau(s)`` are :class:`Envelope`
objects, represented through the lag ``t - sigma(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _backend
from .errors import (IncommensuratePeriods, OutOfDomain, PiecewiseError,
                     UnsupportedPieceDegree)

MAX_DEGREE = 3
# a combined period larger than this many base periods is refused
PERIOD_CAP = 10_000


def as_fraction(x) -> Fraction:
    """Exact rational from an int, float, Fraction or string like ``"7/3"``.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (np.floating, np.integer)):
        return as_fraction(x.item())
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def fraction_to_json(x: Fraction):
    """Inverse of :func:`as_fraction` used by serializers."""
    if x.denominator == 1:
        return int(x)
    f = float(x)
    if Fraction(repr(f)) == x:
        return f
    return f"{x.numerator}/{x.denominator}"


def _trim(coeffs) -> tuple:
    c = [as_fraction(v) for v in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if not c:
        c = [Fraction(0)]
    return tuple(c)


def taylor_shift(c: Sequence[Fraction], h) -> tuple:
    """Coefficients of ``x -> c(x + h)`` (exact)."""
    h = as_fraction(h)
    n = len(c)
    if h == 0 or n == 1:
        return tuple(c)
    out = [Fraction(0)] * n
    for k in range(n):
        ck = c[k]
        if ck == 0:
            continue
        # binomial expansion of (x + h)^k
        hp = Fraction(1)
        for j in range(k, -1, -1):
            out[j] += ck * math.comb(k, j) * hp
            hp *= h
    return _trim(out)


def _peval(c, x):
    r = 0
    for v in reversed(c):
        r = r * x + v
    return r


def _pderiv(c) -> tuple:
    if len(c) == 1:
        return (Fraction(0),)
    return _trim([k * c[k] for k in range(1, len(c))])


def _critical_points(c, h) -> list:
    """Interior points of (0, h) where the derivative of ``c`` vanishes."""
    dc = [float(v) for v in _pderiv(c)]
    if len(dc) == 1:
        return []
    roots = np.roots(dc[::-1])
    out = []
    for r in roots:
        if abs(r.imag) < 1e-12 and 0 < r.real and (h is None or r.real < float(h)):
            out.append(float(r.real))
    return out


@dataclass(frozen=True)
class Piece:
    """Polynomial piece on ``[lo, hi)``; coefficients are local to ``lo``.

    ``hi`` is ``None`` for an infinite tail.
    """

    lo: Fraction
    hi: Optional[Fraction]
    coeffs: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def length(self):
        return None if self.hi is None else self.hi - self.lo

    def at(self, t):
        """Exact value at absolute ``t``."""
        return _peval(self.coeffs, as_fraction(t) - self.lo)

    def left_value(self):
        """Limit as t approaches ``hi`` from the left."""
        return _peval(self.coeffs, self.hi - self.lo)

    def localized(self, lo) -> "Piece":
        lo = as_fraction(lo)
        return Piece(lo, self.hi, taylor_shift(self.coeffs, lo - self.lo))

    def clipped(self, a, b) -> "Piece":
        lo = max(self.lo, a)
        hi = b if self.hi is None else (min(self.hi, b) if b is not None else self.hi)
        p = self.localized(lo)
        return Piece(lo, hi, p.coeffs)


@dataclass(frozen=True)
class Pattern:
    """Periodic tail: ``f(t) = pieces((t - start) mod period)``.

    Pattern pieces live in phase coordinates ``[0, period)``.
    """

    start: Fraction
    period: Fraction
    pieces: tuple


class PiecewiseFn:
    """Piecewise polynomial of time with an eventually periodic or affine tail.

    Parameters
    ----------
    t0 : rational
        Start of the domain.
    prelude : sequence of Piece
        Contiguous pieces from ``t0``.  Without a pattern the final piece
        must be an infinite tail of degree at most one.
    pattern : Pattern, optional
        Periodic continuation from ``pattern.start`` (which must equal the
        end of the prelude).
    nonneg : bool
        Verify that the function never goes negative.
    name : str
        Label used in diagnostics.
    """

    def __init__(self, t0, prelude: Sequence[Piece], pattern: Optional[Pattern] = None,
                 nonneg: bool = False, name: str = "f"):
        self.t0 = as_fraction(t0)
        self.prelude = tuple(prelude)
        self.pattern = pattern
        self.name = name
        self._bank = None
        self._check_structure()
        self.nonneg = False
        if nonneg:
            bad = self.negative_regions()
            if bad:
                lo, hi = bad[0]
                raise PiecewiseError(f"{name}: negative on [{float(lo):g}, "
                                     f"{'inf' if hi is None else format(float(hi), 'g')})")
            self.nonneg = True

    # ------------------------------------------------------------------
    # construction

    def _check_structure(self):
        cur = self.t0
        for k, pc in enumerate(self.prelude):
            if pc.degree > MAX_DEGREE:
                raise PiecewiseError(f"{self.name}: piece {k} has degree {pc.degree} > {MAX_DEGREE}")
            if pc.lo != cur:
                kind = "gap" if pc.lo > cur else "overlap"
                raise PiecewiseError(f"{self.name}: {kind} at t={float(cur):g} before piece {k}")
            if pc.hi is None:
                if k != len(self.prelude) - 1 or self.pattern is not None:
                    raise PiecewiseError(f"{self.name}: only the last piece may be unbounded")
                if pc.degree > 1:
                    raise PiecewiseError(f"{self.name}: unbounded tail must be constant or affine")
                return
            if pc.hi <= pc.lo:
                raise PiecewiseError(f"{self.name}: empty piece {k} at t={float(pc.lo):g}")
            cur = pc.hi
        if self.pattern is None:
            raise PiecewiseError(f"{self.name}: domain ends at t={float(cur):g}; "
                                 "add a pattern or an unbounded tail")
        pat = self.pattern
        if pat.start != cur:
            raise PiecewiseError(f"{self.name}: pattern starts at {float(pat.start):g} "
                                 f"but the prelude ends at {float(cur):g}")
        if pat.period <= 0:
            raise PiecewiseError(f"{self.name}: period must be positive")
        u = Fraction(0)
        for k, pc in enumerate(pat.pieces):
            if pc.degree > MAX_DEGREE:
                raise PiecewiseError(f"{self.name}: pattern piece {k} has degree {pc.degree}")
            if pc.lo != u:
                kind = "gap" if pc.lo > u else "overlap"
                raise PiecewiseError(f"{self.name}: pattern {kind} at phase {float(u):g}")
            if pc.hi is None or pc.hi <= pc.lo:
                raise PiecewiseError(f"{self.name}: bad pattern piece {k}")
            u = pc.hi
        if u != pat.period:
            raise PiecewiseError(f"{self.name}: pattern covers [0, {float(u):g}) "
                                 f"instead of [0, {float(pat.period):g})")

    @classmethod
    def constant(cls, c, t0=0, nonneg=False, name="f") -> "PiecewiseFn":
        return cls(t0, [Piece(as_fraction(t0), None, _trim([c]))], nonneg=nonneg, name=name)

    @classmethod
    def from_spec(cls, spec, t0=0, nonneg=False, name="f") -> "PiecewiseFn":
        """Build from the configuration form.

        ``spec`` is a number (constant) or a mapping with ``pieces`` (absolute
        time polynomials ``poly=[c0, c1, ...]`` on ``[from, to)``), and
        optionally ``period``, ``pattern_start`` and ``pattern`` (pieces in the
        phase variable ``u = (t - pattern_start) mod period``).  The last
        prelude piece may have ``to: null`` when there is no pattern.
        """
        t0 = as_fraction(t0)
        if not isinstance(spec, dict):
            return cls.constant(spec, t0, nonneg=nonneg, name=name)
        prelude = []
        for k, ps in enumerate(spec.get("pieces", [])):
            lo = as_fraction(ps["from"])
            hi = None if ps.get("to") is None else as_fraction(ps["to"])
            c = _trim(ps["poly"])
            prelude.append(Piece(lo, hi, taylor_shift(c, lo)))
        pattern = None
        if "period" in spec or "pattern" in spec:
            P = as_fraction(spec["period"])
            start = as_fraction(spec.get("pattern_start", prelude[-1].hi if prelude else t0))
            pieces = []
            for ps in spec.get("pattern", []):
                lo = as_fraction(ps["from"])
                hi = as_fraction(ps["to"])
                pieces.append(Piece(lo, hi, taylor_shift(_trim(ps["poly"]), lo)))
            pattern = Pattern(start, P, tuple(pieces))
        return cls(t0, prelude, pattern, nonneg=nonneg, name=name)

    def to_spec(self):
        """Configuration form accepted by :meth:`from_spec`."""
        if self.pattern is None and len(self.prelude) == 1 and self.prelude[0].degree == 0:
            return fraction_to_json(self.prelude[0].coeffs[0])

        def piece_json(pc, origin=Fraction(0)):
            c = taylor_shift(pc.coeffs, -(pc.lo - origin))
            return {"from": fraction_to_json(pc.lo - origin),
                    "to": None if pc.hi is None else fraction_to_json(pc.hi - origin),
                    "poly": [fraction_to_json(v) for v in c]}

        out = {"pieces": [piece_json(pc) for pc in self.prelude]}
        if self.pattern is not None:
            out["period"] = fraction_to_json(self.pattern.period)
            out["pattern_start"] = fraction_to_json(self.pattern.start)
            out["pattern"] = [piece_json(pc) for pc in self.pattern.pieces]
        return out

    def renamed(self, name) -> "PiecewiseFn":
        f = PiecewiseFn(self.t0, self.prelude, self.pattern, name=name)
        f.nonneg = self.nonneg
        return f

    # ------------------------------------------------------------------
    # structure queries

    @property
    def max_degree(self) -> int:
        pcs = list(self.prelude) + (list(self.pattern.pieces) if self.pattern else [])
        return max(pc.degree for pc in pcs)

    @property
    def period(self) -> Optional[Fraction]:
        return None if self.pattern is None else self.pattern.period

    @property
    def regime_start(self) -> Fraction:
        """Time from which the function is periodic or on its affine tail."""
        if self.pattern is not None:
            return self.pattern.start
        return self.prelude[-1].lo

    @property
    def has_constant_tail(self) -> bool:
        return self.pattern is None and self.prelude[-1].degree == 0

    @property
    def is_eventually_periodic(self) -> bool:
        return self.pattern is not None or self.has_constant_tail

    def piece_at(self, t, side: int = 0) -> Piece:
        """Absolute piece containing ``t`` (the one ending at ``t`` if side=1)."""
        t = as_fraction(t)
        if t < self.t0 or (side and t == self.t0):
            raise OutOfDomain(f"{self.name}: t={float(t):g} before domain start {float(self.t0):g}")
        pat = self.pattern
        if pat is None or (t < pat.start if not side else t <= pat.start):
            for pc in self.prelude:
                if (pc.hi is None or (t < pc.hi if not side else t <= pc.hi)) and \
                        (pc.lo <= t if not side else pc.lo < t):
                    return pc
            raise OutOfDomain(f"{self.name}: t={float(t):g}")
        u = t - pat.start
        k = u // pat.period
        u -= k * pat.period
        if side and u == 0:
            u = pat.period
            k -= 1
        base = pat.start + k * pat.period
        for pc in pat.pieces:
            if (pc.lo <= u < pc.hi) if not side else (pc.lo < u <= pc.hi):
                return Piece(base + pc.lo, base + pc.hi, pc.coeffs)
        raise AssertionError("pattern lookup failed")

    def pieces_between(self, a, b=None) -> list:
        """Pieces overlapping ``[a, b)``, clipped, coefficients local to the clip."""
        a = max(as_fraction(a), self.t0)
        b = None if b is None else as_fraction(b)
        out = []
        pat = self.pattern
        for pc in self.prelude:
            if pc.hi is not None and pc.hi <= a:
                continue
            if b is not None and pc.lo >= b:
                break
            out.append(pc.clipped(a, b))
        if pat is not None and (b is None or b > pat.start):
            if b is None:
                raise ValueError("pieces_between needs a finite end for periodic functions")
            u0 = max(a, pat.start) - pat.start
            k = u0 // pat.period
            while True:
                base = pat.start + k * pat.period
                if base >= b:
                    break
                for pc in pat.pieces:
                    lo, hi = base + pc.lo, base + pc.hi
                    if hi <= a or lo >= b:
                        continue
                    out.append(Piece(lo, hi, pc.coeffs).clipped(a, b))
                k += 1
        return out

    def breakpoints(self, a, b) -> np.ndarray:
        """Piece boundaries in ``[a, b]`` as floats (sorted, unique)."""
        pts = set()
        for pc in self.pieces_between(a, b):
            pts.add(pc.lo)
            if pc.hi is not None:
                pts.add(pc.hi)
        a, b = as_fraction(a), as_fraction(b)
        pts = {p for p in pts if a <= p <= b}
        # clip ends are not true breakpoints
        true_bps = {p for p in pts if self._is_boundary(p)}
        return np.array(sorted(float(p) for p in true_bps))

    def _is_boundary(self, t: Fraction) -> bool:
        if t == self.t0:
            return True
        for pc in self.prelude:
            if pc.lo == t:
                return True
        pat = self.pattern
        if pat is not None and t >= pat.start:
            u = (t - pat.start) % pat.period
            return any(pc.lo == u for pc in pat.pieces)
        return False

    def discontinuities(self, a, b) -> list:
        """Breakpoints in ``(a, b]`` where the left limit differs from the value."""
        out = []
        for bp in self.breakpoints(a, b):
            t = as_fraction(float(bp))
            if t <= self.t0:
                continue
            left = self.piece_at(t, side=1).left_value()
            right = self.piece_at(t).at(t)
            if left != right:
                out.append(float(t))
        return out

    def _all_pieces(self):
        """Every distinct piece once: prelude plus one pattern period."""
        pcs = list(self.prelude)
        if self.pattern is not None:
            base = self.pattern.start
            pcs += [Piece(base + pc.lo, base + pc.hi, pc.coeffs) for pc in self.pattern.pieces]
        return pcs

    def negative_regions(self) -> list:
        """Intervals on which the function takes negative values."""
        out = []
        for pc in self._all_pieces():
            if self._piece_min(pc) < 0:
                out.append((pc.lo, pc.hi))
        return out

    @staticmethod
    def _piece_extrema(pc: Piece):
        """(min, max) over a piece, including its right-end limit."""
        c = pc.coeffs
        h = pc.length
        vals = [float(c[0])]
        if h is None:
            # affine tail: unbounded unless constant
            if pc.degree == 1 and c[1] != 0:
                return (-math.inf, float(c[0])) if c[1] < 0 else (float(c[0]), math.inf)
            return float(c[0]), float(c[0])
        vals.append(float(_peval(c, h)))
        fc = [float(v) for v in c]
        for x in _critical_points(c, h):
            vals.append(float(np.polyval(fc[::-1], x)))
        return min(vals), max(vals)

    def _piece_min(self, pc):
        return self._piece_extrema(pc)[0]

    def bounds(self, a=None, b=None):
        """Tight (inf, sup) of the function over ``[a, b]`` (whole domain by default)."""
        if a is None and b is None:
            pcs = self._all_pieces()
        else:
            a = self.t0 if a is None else as_fraction(a)
            if b is None:
                end = self.regime_start + (self.period or 0)
                pcs = self.pieces_between(a, max(end, a + 1)) if self.pattern else self.pieces_between(a)
                if self.pattern is not None:
                    pcs += self._all_pieces()[len(self.prelude):]
            else:
                pcs = self.pieces_between(a, as_fraction(b))
        lo, hi = math.inf, -math.inf
        for pc in pcs:
            m, M = self._piece_extrema(pc)
            lo, hi = min(lo, m), max(hi, M)
        return lo, hi

    # ------------------------------------------------------------------
    # evaluation

    @property
    def bank(self) -> "Bank":
        if self._bank is None:
            self._bank = Bank([self])
        return self._bank

    def values(self, t, side: int = 0) -> np.ndarray:
        """Vectorized evaluation; NaN before the domain start."""
        t = np.asarray(t, dtype=float)
        return _backend.pw_eval(self.bank.arrays, 0, t.ravel(), side).reshape(t.shape)

    def __call__(self, t, side: int = 0):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < float(self.t0)):
            raise OutOfDomain(f"{self.name}: evaluation before t0={float(self.t0):g}")
        v = self.values(t_arr, side)
        return float(v) if np.ndim(t) == 0 else v

    evaluate = __call__

    def antiderivative(self, t) -> np.ndarray:
        """``int_{t0}^{t} f`` evaluated from exact piecewise antiderivatives."""
        t = np.asarray(t, dtype=float)
        return _backend.pw_antideriv(self.bank.arrays, 0, t.ravel()).reshape(t.shape)

    def integral(self, a, b) -> float:
        F = self.antiderivative(np.array([a, b], dtype=float))
        return float(F[1] - F[0])

    def __repr__(self):
        tail = f"period={float(self.pattern.period):g}" if self.pattern else "affine tail"
        return f"PiecewiseFn({self.name}, {len(self.prelude)} prelude pieces, {tail})"


# ----------------------------------------------------------------------
# flat kernel bank


class Bank:
    """Several piecewise functions flattened into float arrays for the kernels."""

    def __init__(self, fns: Sequence[PiecewiseFn]):
        pre_lo, pre_c, pre_F, pre_off = [], [], [], [0]
        pat_lo, pat_c, pat_F, pat_off = [], [], [], [0]
        Tp, P, FTp, IP = [], [], [], []
        for f in fns:
            acc = Fraction(0)
            for pc in f.prelude:
                pre_lo.append(float(pc.lo))
                pre_c.append([float(v) for v in pc.coeffs] + [0.0] * (4 - len(pc.coeffs)))
                pre_F.append(float(acc))
                if pc.hi is not None:
                    acc += _pint(pc.coeffs, pc.hi - pc.lo)
            pre_off.append(len(pre_lo))
            if f.pattern is None:
                Tp.append(math.inf)
                P.append(1.0)
                FTp.append(0.0)
                IP.append(0.0)
            else:
                pacc = Fraction(0)
                for pc in f.pattern.pieces:
                    pat_lo.append(float(pc.lo))
                    pat_c.append([float(v) for v in pc.coeffs] + [0.0] * (4 - len(pc.coeffs)))
                    pat_F.append(float(pacc))
                    pacc += _pint(pc.coeffs, pc.hi - pc.lo)
                Tp.append(float(f.pattern.start))
                P.append(float(f.pattern.period))
                FTp.append(float(acc))
                IP.append(float(pacc))
            pat_off.append(len(pat_lo))
        # a padding row keeps every array non-empty
        pre_lo.append(math.inf)
        pre_c.append([0.0] * 4)
        pre_F.append(0.0)
        pat_lo.append(math.inf)
        pat_c.append([0.0] * 4)
        pat_F.append(0.0)
        self.arrays = (np.array(pre_lo), np.array(pre_c), np.array(pre_F),
                       np.array(pre_off, dtype=np.int64),
                       np.array(pat_lo), np.array(pat_c), np.array(pat_F),
                       np.array(pat_off, dtype=np.int64),
                       np.array(Tp), np.array(P), np.array(FTp), np.array(IP))
        self.size = len(fns)

    def eval(self, fid, t, side=0):
        return _backend.pw_eval(self.arrays, fid, np.ascontiguousarray(t, dtype=float), side)

    def antideriv(self, fid, t):
        return _backend.pw_antideriv(self.arrays, fid, np.ascontiguousarray(t, dtype=float))


def _pint(c, x):
    """Exact integral of local polynomial ``c`` over [0, x]."""
    return sum(v * x ** (k + 1) / (k + 1) for k, v in enumerate(c))


# ----------------------------------------------------------------------
# combining functions on a common grid


def _lcm_fraction(a: Fraction, b: Fraction) -> Fraction:
    num = math.lcm(a.numerator * b.denominator, b.numerator * a.denominator)
    return Fraction(num, a.denominator * b.denominator)


def common_period(periods: Iterable[Fraction]) -> Optional[Fraction]:
    """Least common multiple of rational periods, or None for none given."""
    periods = [as_fraction(p) for p in periods if p is not None]
    if not periods:
        return None
    P = reduce(_lcm_fraction, periods)
    if P > PERIOD_CAP * max(periods):
        raise IncommensuratePeriods(f"common period {float(P):g} exceeds the cap")
    return P


def common_structure(fns: Sequence[PiecewiseFn]):
    """(t0, regime start, common period or None) shared by ``fns``."""
    t0 = max(f.t0 for f in fns)
    start = max(f.regime_start for f in fns)
    periodic = [f for f in fns if f.pattern is not None]
    affine = [f for f in fns if not f.is_eventually_periodic]
    if periodic and affine:
        raise IncommensuratePeriods("cannot combine a periodic pattern with a growing affine tail")
    P = common_period(f.period for f in periodic)
    return t0, start, P


def combine(fns: Sequence[PiecewiseFn], op, name="f", nonneg=False) -> PiecewiseFn:
    """Pointwise combination on the union of all breakpoints.

    ``op(lo, hi, coeff_list)`` receives the local coefficients of every input
    on the segment ``[lo, hi)`` (``hi`` may be None on an infinite tail) and
    returns a list of ``(lo, hi, coeffs)`` output pieces covering it.
    """
    t0, start, P = common_structure(fns)
    if P is None and all(f.has_constant_tail for f in fns):
        P = Fraction(1)  # constant tails: any period works, collapse afterwards

    def segments(a, b):
        cuts = {a}
        if b is not None:
            cuts.add(b)
        for f in fns:
            for pc in f.pieces_between(a, b):
                cuts.add(pc.lo)
                if pc.hi is not None:
                    cuts.add(pc.hi)
        cuts = sorted(c for c in cuts if c >= a and (b is None or c <= b))
        segs = list(zip(cuts[:-1], cuts[1:]))
        if b is None:
            segs.append((cuts[-1], None))
        return segs

    def apply(a, b):
        out = []
        for lo, hi in segments(a, b):
            cl = [f.piece_at(lo).localized(lo).coeffs for f in fns]
            for plo, phi, c in op(lo, hi, cl):
                out.append(Piece(plo, phi, _trim(c)))
        return _merge(out)

    prelude = apply(t0, start) if start > t0 else []
    if P is None:
        prelude += apply(start, None)
        return PiecewiseFn(t0, _merge(prelude), None, nonneg=nonneg, name=name)
    pat_abs = apply(start, start + P)
    pattern = Pattern(start, P, tuple(Piece(pc.lo - start, pc.hi - start, pc.coeffs)
                                      for pc in pat_abs))
    return simplify(PiecewiseFn(t0, prelude, pattern, nonneg=nonneg, name=name))


def _merge(pieces: list) -> list:
    """Join adjacent pieces carrying the same polynomial."""
    out = []
    for pc in pieces:
        if out and out[-1].hi == pc.lo:
            prev = out[-1]
            if prev.localized(pc.lo).coeffs == pc.coeffs:
                out[-1] = Piece(prev.lo, pc.hi, prev.coeffs)
                continue
        out.append(pc)
    return out


def simplify(f: PiecewiseFn) -> PiecewiseFn:
    """Collapse constant patterns into tails, shrink repeated periods, merge pieces."""
    pat = f.pattern
    prelude = _merge(list(f.prelude))
    if pat is not None:
        pattern_pieces = _merge(list(pat.pieces))
        if len(pattern_pieces) == 1 and pattern_pieces[0].degree == 0:
            c = pattern_pieces[0].coeffs
            prelude = _merge(prelude + [Piece(pat.start, None, c)])
            pat = None
        else:
            pattern_pieces = _reduce_period(pattern_pieces, pat.period)
            pat = Pattern(pat.start, pattern_pieces[-1].hi, tuple(pattern_pieces))
    g = PiecewiseFn(f.t0, prelude, pat, name=f.name)
    g.nonneg = f.nonneg
    return g


def _pattern_piece_at(pat: Pattern, t: Fraction) -> Piece:
    u = (t - pat.start) % pat.period
    for pc in pat.pieces:
        if pc.lo <= u < pc.hi:
            return pc.localized(u)
    raise AssertionError


def _reduce_period(pieces: list, P: Fraction) -> list:
    """Smallest sub-period q | P such that the pattern repeats with period q."""
    n_pc = len(pieces)
    for div in range(n_pc, 1, -1):
        if n_pc % div:
            continue
        q = P / div
        step = n_pc // div
        ok = True
        for k in range(1, div):
            for j in range(step):
                a, b = pieces[j], pieces[k * step + j]
                if b.lo - a.lo != k * q or b.hi - a.hi != k * q or a.coeffs != b.coeffs:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return pieces[:step]
    return pieces


def _add_op(lo, hi, cl):
    n = max(len(c) for c in cl)
    out = [Fraction(0)] * n
    for c in cl:
        for k, v in enumerate(c):
            out[k] += v
    return [(lo, hi, out)]


def fn_sum(fns: Sequence[PiecewiseFn], name="sum") -> PiecewiseFn:
    """Pointwise sum."""
    if len(fns) == 1:
        return fns[0].renamed(name)
    nonneg = all(f.nonneg for f in fns)
    return combine(fns, _add_op, name=name, nonneg=nonneg)


def _minmax2(pick_min: bool):
    def op(lo, hi, cl):
        c, d = cl
        n = max(len(c), len(d))
        c = list(c) + [Fraction(0)] * (n - len(c))
        d = list(d) + [Fraction(0)] * (n - len(d))
        diff = _trim([x - y for x, y in zip(c, d)])
        if len(diff) > 2:
            raise UnsupportedPieceDegree("pointwise min/max needs affine pieces")

        def choose(x_probe):
            dv = _peval(diff, x_probe)
            first = (dv <= 0) if pick_min else (dv >= 0)
            return c if first else d

        h = None if hi is None else hi - lo
        if len(diff) == 2 and diff[1] != 0:
            xc = -diff[0] / diff[1]
            if xc > 0 and (h is None or xc < h):
                mid1 = xc / 2
                if h is None:
                    mid2 = xc + 1
                else:
                    mid2 = (xc + h) / 2
                first = choose(mid1)
                second = taylor_shift(choose(mid2), xc)
                return [(lo, lo + xc, first), (lo + xc, hi, second)]
        probe = (h / 2) if h is not None else Fraction(1)
        return [(lo, hi, choose(probe))]
    return op


def pointwise_min(fns: Sequence[PiecewiseFn], name="min") -> PiecewiseFn:
    """Pointwise minimum of piecewise-affine functions."""
    out = reduce(lambda a, b: combine([a, b], _minmax2(True), name=name), fns)
    return out.renamed(name) if len(fns) == 1 else out


def pointwise_max(fns: Sequence[PiecewiseFn], name="max") -> PiecewiseFn:
    """Pointwise maximum of piecewise-affine functions."""
    out = reduce(lambda a, b: combine([a, b], _minmax2(False), name=name), fns)
    return out.renamed(name) if len(fns) == 1 else out


# ----------------------------------------------------------------------
# retarded arguments


class DelayArg:
    """Retarded argument ``tau(t) = t - d(t)`` given by its delay amount ``d``."""

    def __init__(self, delay_amount: PiecewiseFn, t0=None, name: str = "tau"):
        self.delay = delay_amount
        self.t0 = delay_amount.t0 if t0 is None else as_fraction(t0)
        self.name = name

    def tau(self, t, side: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t - self.delay.values(t, side)

    __call__ = tau

    def is_nondecreasing(self, window=None) -> bool:
        """Exact monotonicity test on ``window`` (default: whole domain)."""
        return not self.decreasing_regions(window)

    def decreasing_regions(self, window=None) -> list:
        d = self.delay
        if window is None:
            end = d.regime_start + (d.period or 1) + (d.period or 0)
            pcs = d.pieces_between(d.t0, end)
        else:
            pcs = d.pieces_between(window[0], window[1])
        bad = []
        for k, pc in enumerate(pcs):
            # slope of tau is 1 - d'
            dc = _pderiv(pc.coeffs)
            if len(dc) == 1:
                if dc[0] > 1:
                    bad.append((pc.lo, pc.hi))
            else:
                h = pc.length
                shifted = list(dc)
                shifted[0] -= 1
                # max of d' - 1 over the piece
                pts = [Fraction(0)] + ([h] if h is not None else [])
                vals = [float(_peval(shifted, x)) for x in pts]
                vals += [float(np.polyval([float(v) for v in shifted][::-1], x))
                         for x in _critical_points(shifted, h)]
                if h is None and len(shifted) > 1 and shifted[-1] > 0:
                    vals.append(math.inf)
                if max(vals) > 1e-14:
                    bad.append((pc.lo, pc.hi))
            # downward jump of tau == upward jump of d
            if k + 1 < len(pcs) and pc.hi is not None and pcs[k + 1].lo == pc.hi:
                if pcs[k + 1].coeffs[0] > pc.left_value():
                    bad.append((pc.hi, pc.hi))
        return bad

    def preimages(self, targets, a: float, b: float) -> np.ndarray:
        """Times s in [a, b] with tau(s) equal to one of ``targets`` (affine pieces)."""
        targets = np.atleast_1d(np.asarray(targets, dtype=float))
        out = []
        for pc in self.delay.pieces_between(as_fraction(a), as_fraction(b)):
            lo = float(pc.lo)
            hi = float(pc.hi) if pc.hi is not None else float(b)
            c = [float(v) for v in pc.coeffs] + [0.0, 0.0]
            if pc.degree > 1:
                # sample-based inversion for curved pieces
                xs = np.linspace(lo, hi, 65)
                ts = xs - self.delay.values(xs)
                for y in targets:
                    s = np.nonzero(np.diff(np.sign(ts - y)))[0]
                    out.extend(xs[s].tolist())
                continue
            # tau = lo + x - c0 - c1 x
            tau0 = lo - c[0]
            slope = 1.0 - c[1]
            if slope == 0:
                continue
            x = (targets - tau0) / slope
            s = lo + x
            ok = (s >= lo) & (s <= hi)
            out.extend(s[ok].tolist())
        return np.unique(np.array(out, dtype=float))

    def __repr__(self):
        return f"DelayArg({self.name})"


class Envelope(DelayArg):
    """Non-decreasing majorant ``sigma(t) = sup_{s<=t} tau(s)``.

    Stored through its lag ``t - sigma(t)``, so it is itself a valid
    retarded argument.  ``source`` links the argument it majorizes and
    ``resolution`` is zero for exact envelopes.
    """

    def __init__(self, lag: PiecewiseFn, source: Optional[DelayArg] = None,
                 resolution: float = 0.0, name: str = "sigma"):
        super().__init__(lag, name=name)
        self.source = source
        self.resolution = resolution

    @property
    def lag(self) -> PiecewiseFn:
        return self.delay

    def sigma(self, t, side=0):
        return self.tau(t, side)


def sup_envelope(arg: DelayArg) -> Envelope:
    """Exact running maximum of a piecewise-affine retarded argument.

    Rising pieces pass through, falling pieces freeze at the running maximum
    until the argument climbs back above it.  For a periodic delay the
    envelope is periodic with the same period from
    ``start + ceil(D/P)*P`` on, since ``sigma(t)`` only depends on ``tau``
    over ``[t - D, t]``.
    """
    if isinstance(arg, Envelope):
        return arg
    if arg.is_nondecreasing():
        return Envelope(arg.delay, source=arg, name=f"sigma[{arg.name}]")
    d = arg.delay
    if d.max_degree >= 2:
        raise UnsupportedPieceDegree("exact envelope needs affine pieces; use numeric_envelope")
    if d.pattern is None:
        tail = d.prelude[-1]
        if len(tail.coeffs) > 1 and tail.coeffs[1] >= 1:
            raise PiecewiseError(f"{d.name}: argument does not tend to infinity")
        lag_pieces = _running_max(d.pieces_between(d.t0))
        lag = PiecewiseFn(d.t0, _merge(lag_pieces), None, name=f"lag[{arg.name}]")
        return Envelope(lag, source=arg, name=f"sigma[{arg.name}]")
    P = d.pattern.period
    D = max(max(pc.coeffs[0], pc.left_value()) for pc in d._all_pieces())
    T_sig = d.pattern.start + math.ceil(D / P) * P
    lag_pieces = _running_max(d.pieces_between(d.t0, T_sig + P))
    prelude = [pc for pc in lag_pieces if pc.hi <= T_sig]
    pat = [Piece(pc.lo - T_sig, pc.hi - T_sig, pc.coeffs) for pc in lag_pieces if pc.lo >= T_sig]
    lag = PiecewiseFn(d.t0, _merge(prelude), Pattern(T_sig, P, tuple(_merge(pat))),
                      name=f"lag[{arg.name}]")
    return Envelope(simplify(lag), source=arg, name=f"sigma[{arg.name}]")


def _running_max(pieces: list) -> list:
    """Lag pieces ``t - sigma`` of the running max of ``tau = t - d``."""
    out = []
    M = None
    for pc in pieces:
        c0 = pc.coeffs[0]
        c1 = pc.coeffs[1] if len(pc.coeffs) > 1 else Fraction(0)
        tau0 = pc.lo - c0
        slope = 1 - c1
        h = pc.length
        tau_end = None if h is None else tau0 + slope * h

        def frozen(lo, hi, level):
            # sigma == level  ->  lag = t - level
            return Piece(lo, hi, (lo - level, Fraction(1)))

        if M is None or tau0 >= M:
            if slope >= 0:
                out.append(pc)
                M = tau_end if tau_end is not None else None
            else:
                M = tau0
                out.append(frozen(pc.lo, pc.hi, M))
            continue
        # tau starts below the running max
        if slope > 0 and (tau_end is None or tau_end > M):
            xc = (M - tau0) / slope
            out.append(frozen(pc.lo, pc.lo + xc, M))
            out.append(pc.localized(pc.lo + xc))
            M = tau_end
        else:
            out.append(frozen(pc.lo, pc.hi, M))
    return out


def numeric_envelope(arg: DelayArg, per_period: int = 10_000) -> Envelope:
    """Fine-grid running maximum for curved arguments.

    The envelope is the piecewise-linear interpolant of the running max on a
    grid of ``per_period`` points per period; ``resolution`` records the
    grid spacing.
    """
    d = arg.delay
    if d.pattern is None:
        span = max(Fraction(10), d.regime_start - d.t0 + 10)
        P = None
    else:
        P = d.pattern.period
        D = as_fraction(math.ceil(d.bounds()[1] * 1e6) / 1e6)
        T_sig = d.pattern.start + math.ceil(D / P) * P
        span = T_sig + P - d.t0
    n = int(per_period * (float(span) / float(P) if P else 10)) + 1
    grid = [d.t0 + span * Fraction(k, n - 1) for k in range(n)]
    tf = np.array([float(g) for g in grid])
    sig = np.maximum.accumulate(tf - d.values(tf))
    pieces = []
    for k in range(n - 1):
        lo, hi = grid[k], grid[k + 1]
        s0 = as_fraction(float(sig[k]))
        s1 = as_fraction(float(sig[k + 1]))
        slope = (s1 - s0) / (hi - lo)
        pieces.append(Piece(lo, hi, (lo - s0, 1 - slope)))
    if P is None:
        last = pieces[-1]
        pieces[-1] = Piece(last.lo, None, d.piece_at(last.lo).localized(last.lo).coeffs)
        lag = PiecewiseFn(d.t0, pieces, None, name=f"lag[{arg.name}]")
    else:
        T_sig = d.t0 + span - P
        prelude = [pc for pc in pieces if pc.hi <= T_sig]
        pat = [Piece(pc.lo - T_sig, pc.hi - T_sig, pc.coeffs) for pc in pieces if pc.lo >= T_sig]
        lag = PiecewiseFn(d.t0, prelude, Pattern(T_sig, P, tuple(pat)), name=f"lag[{arg.name}]")
    return Envelope(lag, source=arg, resolution=float(span) / (n - 1), name=f"sigma[{arg.name}]")


def envelope_of(arg: DelayArg) -> Envelope:
    """Exact envelope when possible, numeric otherwise."""
    try:
        return sup_envelope(arg)
    except UnsupportedPieceDegree:
        return numeric_envelope(arg)


def delay_bounds(arg: DelayArg, window=None):
    """(d_min, d_max) of the delay amount over ``window`` (whole domain by default)."""
    if window is None:
        return arg.delay.bounds()
    return arg.delay.bounds(window[0], window[1])


# ----------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class Candidates:
    """Arithmetic sample sequence ``t_n = step*n + offset`` for n in [n_from, n_to]."""

    step: float
    offset: float
    n_from: int = 10
    n_to: int = 20

    def points(self, n_from=None, n_to=None) -> np.ndarray:
        a = self.n_from if n_from is None else n_from
        b = self.n_to if n_to is None else n_to
        n = np.arange(a, b + 1, dtype=float)
        return self.step * n + self.offset


@dataclass
class Term:
    """One term ``p(t) x(tau(t))`` of the equation."""

    coefficient: PiecewiseFn
    arg: DelayArg


@dataclass
class Problem:
    """An equation ``x' + sum_i p_i(t) x(tau_i(t)) = 0`` on ``[t0, inf)``."""

    t0: Fraction
    terms: list
    candidates: Optional[Candidates] = None
    sigma_overrides: Optional[list] = None
    _envelopes: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> list:
        return [t.coefficient for t in self.terms]

    @property
    def args(self) -> list:
        return [t.arg for t in self.terms]

    def envelope(self, i: int) -> Envelope:
        """sigma_i: the override when given, else the sup-envelope of tau_i."""
        if i not in self._envelopes:
            ov = None if not self.sigma_overrides else self.sigma_overrides[i]
            if ov is not None:
                self._envelopes[i] = ov
            else:
                self._envelopes[i] = envelope_of(self.terms[i].arg)
        return self._envelopes[i]

    def bank(self) -> Bank:
        """Kernel bank holding p_1, d_1, p_2, d_2, ... at fids 0, 1, 2, 3, ..."""
        fns = []
        for t in self.terms:
            fns += [t.coefficient, t.arg.delay]
        return Bank(fns)

    def single(self, i: int) -> "Problem":
        """The sub-equation made of term ``i`` alone."""
        ov = None
        if self.sigma_overrides and self.sigma_overrides[i] is not None:
            ov = [self.sigma_overrides[i]]
        return Problem(self.t0, [self.terms[i]], self.candidates, ov)

    def notes(self) -> list:
        """Informational remarks (not violations)."""
        out = []
        for i, t in enumerate(self.terms):
            f = t.coefficient
            end = f.regime_start + (f.period or 0) + 1
            if f.discontinuities(f.t0, end):
                out.append(f"coefficient {i + 1} is discontinuous; solutions are understood "
                           "as absolutely continuous functions satisfying the equation a.e.")
        return out


def validate_problem(problem: Problem) -> list:
    """List of violated standing hypotheses; empty when the problem is valid."""
    diags = []
    if problem.m < 1:
        diags.append("terms: at least one term is required")
    for i, term in enumerate(problem.terms):
        f = term.coefficient
        for lo, hi in f.negative_regions():
            diags.append(f"terms.{i}.coefficient: negative on [{float(lo):g}, "
                         f"{'inf' if hi is None else format(float(hi), 'g')})")
        d = term.arg.delay
        for lo, hi in d.negative_regions():
            diags.append(f"terms.{i}.delay: negative delay (tau > t) on [{float(lo):g}, "
                         f"{'inf' if hi is None else format(float(hi), 'g')})")
        if d.pattern is None:
            tail = d.prelude[-1]
            if len(tail.coeffs) > 1 and tail.coeffs[1] >= 1:
                diags.append(f"terms.{i}.delay: tau does not tend to infinity")
        elif not math.isfinite(d.bounds()[1]):
            diags.append(f"terms.{i}.delay: unbounded delay")
    for i, ov in enumerate(problem.sigma_overrides or []):
        if ov is None:
            continue
        diags += _check_override(problem, i, ov)
    return diags


def _check_override(problem: Problem, i: int, ov: Envelope) -> list:
    out = []
    term = problem.terms[i]
    lag = ov.lag
    end = float(max(lag.regime_start, term.arg.delay.regime_start)) + \
        2 * float(lag.period or 1) + 2 * float(term.arg.delay.period or 1)
    ts = np.linspace(float(max(lag.t0, term.arg.delay.t0)), end, 4001)
    bps = np.concatenate([lag.breakpoints(float(lag.t0), end),
                          term.arg.delay.breakpoints(float(term.arg.delay.t0), end)])
    ts = np.unique(np.concatenate([ts, bps]))
    e = lag.values(ts)
    d = term.arg.delay.values(ts)
    tol = 1e-12 * (1 + np.abs(ts))
    if np.any(e < -tol):
        out.append(f"sigma_overrides.{i}: sigma(t) <= t fails")
    if np.any(e > d + tol):
        out.append(f"sigma_overrides.{i}: tau(t) <= sigma(t) fails")
    if not ov.is_nondecreasing():
        out.append(f"sigma_overrides.{i}: sigma is not non-decreasing")
    return out


# the operation names used in the documentation
def evaluate(f: PiecewiseFn, t, side: int = 0):
    """Value of ``f`` at ``t`` (left limit when side=1)."""
    return f(t, side)


def is_nondecreasing(arg: DelayArg, window=None) -> bool:
    return arg.is_nondecreasing(window)
