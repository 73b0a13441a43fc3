"""Method-of-steps integration and empirical oscillation classification.

The march itself lives in the compiled kernel (``rk4_march``); this module
builds the step grid, prepares histories and post-processes the trace.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _backend
from .errors import BreakpointDensityExceeded, OutOfDomain, StepTooLarge
from .funcmodel import Bank, Piece, PiecewiseFn, Problem, as_fraction

OSCILLATORY_EMPIRICAL = "OscillatoryEmpirical"
POSITIVE = "PositiveThroughout"
NEGATIVE = "NegativeThroughout"
UNDETERMINED = "Undetermined"

MAX_STEPS = 10 ** 8
ZERO_XTOL = 1e-10
TOUCH_TOL = 1e-12
FINAL_FRACTION = 0.2
# how many generations of propagated derivative jumps get grid points
PROPAGATION_DEPTH = 5


@dataclass(frozen=True)
class History:
    """Initial function on ``[t_hist, t0]``.

    ``constant``: ``x = c``; ``exponential``: ``x = c * exp(-rate * t)``;
    ``piecewise``: a :class:`PiecewiseFn` (its domain is the support).
    """

    kind: str
    c: float = 1.0
    rate: float = 0.0
    fn: Optional[PiecewiseFn] = None

    @classmethod
    def constant(cls, c):
        return cls("constant", c=float(c))

    @classmethod
    def exponential(cls, rate, c=1.0):
        return cls("exponential", c=float(c), rate=float(rate))

    @classmethod
    def piecewise(cls, fn: PiecewiseFn):
        return cls("piecewise", fn=fn)

    @classmethod
    def from_file(cls, path) -> "History":
        """Piecewise-linear history from a two-column ``t,x`` CSV file."""
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((as_fraction(float(row[0])), as_fraction(float(row[1]))))
                except ValueError:
                    if rows:
                        raise
                    continue  # header
        if len(rows) < 2:
            raise ValueError(f"{path}: need at least two (t, x) rows")
        rows.sort()
        pieces = []
        for (ta, xa), (tb, xb) in zip(rows, rows[1:]):
            if tb == ta:
                raise ValueError(f"{path}: repeated time {float(ta):g}")
            pieces.append(Piece(ta, tb, (xa, (xb - xa) / (tb - ta))))
        pieces.append(Piece(rows[-1][0], None, (rows[-1][1],)))
        return cls.piecewise(PiecewiseFn(rows[0][0], pieces, name="history"))

    @classmethod
    def parse(cls, spec: str) -> "History":
        """``const:C``, ``exp:L[,C]`` or ``file:PATH``."""
        kind, _, arg = spec.partition(":")
        try:
            if kind == "const":
                return cls.constant(float(arg))
            if kind == "exp":
                parts = arg.split(",")
                return cls.exponential(float(parts[0]), float(parts[1]) if len(parts) > 1 else 1.0)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad history {spec!r}") from exc
        if kind == "file":
            return cls.from_file(Path(arg))
        raise ValueError(f"bad history {spec!r}; use const:C, exp:L[,C] or file:PATH")

    @property
    def support_start(self) -> float:
        return -math.inf if self.fn is None else float(self.fn.t0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.c)
        if self.kind == "exponential":
            return self.c * np.exp(-self.rate * t)
        return self.fn.values(t)

    def scaled(self, k: float) -> "History":
        if self.kind == "piecewise":
            f = self.fn
            pre = [Piece(pc.lo, pc.hi, tuple(as_fraction(k) * c for c in pc.coeffs))
                   for pc in f.prelude]
            return History.piecewise(PiecewiseFn(f.t0, pre, None, name="history"))
        return History(self.kind, c=self.c * k, rate=self.rate)

    def describe(self) -> str:
        if self.kind == "constant":
            return f"const:{self.c:g}"
        if self.kind == "exponential":
            return f"exp:{self.rate:g},{self.c:g}"
        return "piecewise"

    def kernel_args(self):
        kinds = {"constant": 0, "exponential": 1, "piecewise": 2}
        bank = self.fn.bank if self.fn is not None else Bank([PiecewiseFn.constant(0)])
        return kinds[self.kind], np.array([self.c, self.rate]), bank.arrays


@dataclass
class Trace:
    """Solution on the step grid with its Hermite dense output."""

    t: np.ndarray
    x: np.ndarray
    dx_left: np.ndarray
    dx_right: np.ndarray
    step: float
    history: History
    zero_crossings: list = field(default_factory=list)
    touches: list = field(default_factory=list)
    classification: str = UNDETERMINED
    notes: list = field(default_factory=list)
    sign_violations: int = 0

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    @property
    def derivative(self) -> np.ndarray:
        """Right-hand side at every knot (left limits at step ends)."""
        return np.concatenate([self.dx_left[:1], self.dx_right])

    def dense(self, q) -> np.ndarray:
        """Dense output at ``q`` (within ``[t0, T]``)."""
        q = np.asarray(q, dtype=float)
        return _backend.hermite_eval(self.t, self.x, self.dx_left, self.dx_right, q.ravel()) \
            .reshape(q.shape)

    def summary(self) -> dict:
        return {"t0": self.t0, "horizon": self.horizon, "step": self.step,
                "steps": len(self.t) - 1, "history": self.history.describe(),
                "zero_crossings": len(self.zero_crossings),
                "first_zero": self.zero_crossings[0] if self.zero_crossings else None,
                "last_zero": self.zero_crossings[-1] if self.zero_crossings else None,
                "classification": self.classification, "notes": list(self.notes)}


def _step_grid(problem: Problem, t0: float, T: float, h: float) -> np.ndarray:
    n = int(math.ceil((T - t0) / h - 1e-9))
    if n > MAX_STEPS:
        raise BreakpointDensityExceeded(f"{n} steps exceed the limit of {MAX_STEPS}")
    uniform = np.linspace(t0, T, n + 1)
    events = [np.array([t0, T])]
    for term in problem.terms:
        events.append(term.coefficient.breakpoints(t0, T))
        events.append(term.arg.delay.breakpoints(t0, T))
    ev = np.unique(np.concatenate(events))
    # derivative jumps of x start at t0 and propagate through every argument
    layer = np.array([t0])
    for _ in range(PROPAGATION_DEPTH):
        pre = [term.arg.preimages(layer, t0, T) for term in problem.terms
               if not _identically_zero(term.arg.delay, t0, T)]
        layer = np.unique(np.concatenate(pre)) if pre else np.array([])
        layer = layer[(layer > t0) & (layer < T)]
        if not len(layer):
            break
        ev = np.unique(np.concatenate([ev, layer]))
        if len(ev) > MAX_STEPS:
            raise BreakpointDensityExceeded("breakpoint alignment needs too many steps")
    ev = ev[(ev >= t0) & (ev <= T)]
    # drop uniform points that would create slivers next to an event
    idx = np.searchsorted(ev, uniform)
    near = np.full(uniform.shape, np.inf)
    ok = idx < len(ev)
    near[ok] = np.abs(ev[idx[ok]] - uniform[ok])
    okl = idx > 0
    near[okl] = np.minimum(near[okl], np.abs(uniform[okl] - ev[idx[okl] - 1]))
    grid = np.unique(np.concatenate([uniform[near > 1e-3 * h], ev]))
    if len(grid) > MAX_STEPS:
        raise BreakpointDensityExceeded(f"{len(grid)} steps exceed the limit of {MAX_STEPS}")
    return grid


def _identically_zero(f: PiecewiseFn, a, b) -> bool:
    lo, hi = f.bounds(a, b)
    return lo == 0 and hi == 0


def default_step(problem: Problem, T: float) -> float:
    dmin = _min_positive_delay(problem, float(problem.t0), T)
    return dmin / 20 if dmin > 0 else 0.01


def _min_positive_delay(problem, t0, T):
    vals = [float(t.arg.delay.bounds(t0, T)[0]) for t in problem.terms
            if not _identically_zero(t.arg.delay, t0, T)]
    return min(vals) if vals else 0.0


def simulate(problem: Problem, history: History, T: float, h: Optional[float] = None) -> Trace:
    """Integrate forward from ``t0`` to ``T`` with RK4 steps of about ``h``.

    Raises
    ------
    StepTooLarge
        ``h`` exceeds a quarter of the minimum positive delay on ``[t0, T]``.
    BreakpointDensityExceeded
        Breakpoint alignment needs more than ``1e8`` steps.
    OutOfDomain
        A delayed argument falls before the history support.
    """
    t0 = float(problem.t0)
    T = float(T)
    if not T > t0:
        raise ValueError("horizon must exceed t0")
    notes = list(problem.notes())
    dmin = _min_positive_delay(problem, t0, T)
    if h is None:
        h = default_step(problem, T)
    h = float(h)
    if not h > 0:
        raise ValueError("step must be positive")
    if dmin > 0 and h > dmin / 4:
        raise StepTooLarge(f"h = {h:g} exceeds min delay / 4 = {dmin / 4:g}")
    zero = [_identically_zero(tm.arg.delay, t0, T) for tm in problem.terms]
    for tm, z in zip(problem.terms, zero):
        if not z and float(tm.arg.delay.bounds(t0, T)[0]) == 0:
            notes.append(f"{tm.arg.name}: delay vanishes somewhere; lookups at the current "
                         "time extrapolate the last completed step")
    lowest = min(float(np.min(tm.arg.tau(np.linspace(t0, T, 2001)))) for tm in problem.terms)
    for tm in problem.terms:
        bp = tm.arg.delay.breakpoints(t0, T)
        if len(bp):
            lowest = min(lowest, float(np.min(tm.arg.tau(bp))), float(np.min(tm.arg.tau(bp, 1))))
    if lowest < history.support_start - 1e-12:
        raise OutOfDomain(f"history starts at {history.support_start:g} but arguments reach "
                          f"{lowest:g}")
    grid = _step_grid(problem, t0, T, h)
    bank = problem.bank()
    m = problem.m
    p_ids = np.arange(0, 2 * m, 2, dtype=np.int64)
    d_ids = np.arange(1, 2 * m, 2, dtype=np.int64)
    kind, params, hbank = history.kernel_args()
    x, dxl, dxr, viol, instep = _backend.rk4_march(bank.arrays, p_ids, d_ids,
                                                   np.array(zero, dtype=np.int64), kind,
                                                   params, hbank, grid)
    if instep:
        notes.append(f"{instep} delayed lookups fell inside the current step")
    if viol:
        notes.append(f"sign rule violated at {viol} steps")
    tr = Trace(grid, x, dxl, dxr, h, history, notes=notes, sign_violations=int(viol))
    tr.zero_crossings, tr.touches = zeros(tr, with_touches=True)
    if tr.touches:
        tr.notes.append(f"{len(tr.touches)} tangential touches of zero")
    tr.classification = classify(tr)
    return tr


def _bisect_cubic(tr: Trace, k: int) -> float:
    a, b = float(tr.t[k]), float(tr.t[k + 1])
    fa = float(tr.x[k])
    for _ in range(200):
        if b - a <= ZERO_XTOL:
            break
        mid = 0.5 * (a + b)
        fm = float(tr.dense(np.array([mid]))[0])
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def zeros(tr: Trace, with_touches: bool = False):
    """Sign changes of the dense output, each refined to ``1e-10``."""
    x = tr.x
    out, touches = [], []
    n = len(x)
    scale = float(np.max(np.abs(x))) if n else 0.0
    k = 0
    while k < n - 1:
        a, b = x[k], x[k + 1]
        if a != 0 and b != 0 and (a > 0) != (b > 0):
            out.append(_bisect_cubic(tr, k))
        elif b == 0 and a != 0:
            # exact zero at a knot: a crossing only if the sign flips past it
            j = k + 1
            while j < n - 1 and x[j] == 0:
                j += 1
            if x[j] != 0 and (x[j] > 0) != (a > 0):
                out.append(float(tr.t[k + 1]))
            else:
                touches.append(float(tr.t[k + 1]))
            k = j
            continue
        elif with_touches and abs(b) <= TOUCH_TOL * scale and k + 2 < n and b != 0:
            c = x[k + 2]
            # a strict local minimum of |x| that does not change sign
            if (a > 0) == (b > 0) == (c > 0) and abs(b) < abs(a) and abs(b) < abs(c):
                touches.append(float(tr.t[k + 1]))
        k += 1
    out = sorted(set(out))
    if with_touches:
        return out, touches
    return out


def classify(tr: Trace) -> str:
    """Empirical classification on the simulated horizon."""
    if not np.any(tr.x):
        if "trivial solution" not in tr.notes:
            tr.notes.append("trivial solution")
        return UNDETERMINED
    zs = tr.zero_crossings
    t0, T = tr.t0, tr.horizon
    tail_start = T - FINAL_FRACTION * (T - t0)
    if len(zs) >= 2 and zs[-1] >= tail_start:
        return OSCILLATORY_EMPIRICAL
    if zs:
        return UNDETERMINED
    tail = np.abs(tr.x[tr.t >= tail_start])
    big = float(tail.max()) if len(tail) else 0.0
    if big > 0 and float(tail.min()) >= 1e-6 * big:
        return POSITIVE if tr.x[-1] > 0 else NEGATIVE
    return UNDETERMINED


def residual(tr: Trace, exact) -> float:
    """Max deviation from an exact solution at the knots."""
    return float(np.max(np.abs(tr.x - exact(tr.t))))


def write_series(tr: Trace, path) -> None:
    """``t,x`` CSV with LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(tr.t.tolist(), tr.x.tolist()):
            w.writerow([repr(t), repr(x)])
