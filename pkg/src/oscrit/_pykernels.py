"""Pure-Python / numpy implementation of the numerical kernels.

This is the fallback used when the compiled ``_ckernels`` extension is not
available.  Both modules expose the same functions with the same semantics;
``tests/test_kernels.py`` checks them against each other.

A *bank* is a tuple of flat arrays describing ``m`` piecewise polynomials
(see :meth:`oscrit.funcmodel.Bank.arrays`)::

    (pre_lo, pre_c, pre_F, pre_off, pat_lo, pat_c, pat_F, pat_off,
     Tp, P, FTp, IP)

Polynomial coefficients are local to the piece start and padded to four
entries (degree <= 3).
"""
import bisect
import math

import numpy as np

NAME = "python"


def _poly(c, x):
    return c[..., 0] + x * (c[..., 1] + x * (c[..., 2] + x * c[..., 3]))


def _poly_int(c, x):
    return x * (c[..., 0] + x * (c[..., 1] / 2 + x * (c[..., 2] / 3 + x * c[..., 3] / 4)))


def _split(bank, fid, t, side):
    """Locate pieces for every t; returns (coeffs, local x, F offset, ok)."""
    pre_lo, pre_c, pre_F, pre_off, pat_lo, pat_c, pat_F, pat_off, Tp, P, FTp, IP = bank
    a0, a1 = int(pre_off[fid]), int(pre_off[fid + 1])
    lo = pre_lo[a0:a1]
    sname = "left" if side else "right"
    tp = Tp[fid]
    in_pat = (t > tp) if side else (t >= tp)

    if a1 > a0:
        idx = np.searchsorted(lo, t, side=sname) - 1
        ok = idx >= 0
        idx = np.clip(idx, 0, len(lo) - 1)
        coef = pre_c[a0 + idx]
        x = t - lo[idx]
        off = pre_F[a0 + idx]
    else:  # pattern from the domain start
        ok = np.zeros(t.shape, dtype=bool)
        coef = np.zeros(t.shape + (4,))
        x = np.zeros(t.shape)
        off = np.zeros(t.shape)

    if np.isfinite(tp) and np.any(in_pat):
        b0, b1 = int(pat_off[fid]), int(pat_off[fid + 1])
        plo = pat_lo[b0:b1]
        per = P[fid]
        u = t[in_pat] - tp
        k = np.floor(u / per)
        u = u - k * per
        neg = u < 0
        u[neg] += per
        k[neg] -= 1
        big = u >= per
        u[big] -= per
        k[big] += 1
        if side:
            z = u == 0
            u[z] = per
            k[z] -= 1
        j = np.clip(np.searchsorted(plo, u, side=sname) - 1, 0, len(plo) - 1)
        coef = coef.copy()
        coef[in_pat] = pat_c[b0 + j]
        x = x.copy()
        x[in_pat] = u - plo[j]
        off = off.copy()
        off[in_pat] = FTp[fid] + k * IP[fid] + pat_F[b0 + j]
        ok = ok | in_pat
    return coef, x, off, ok


def pw_eval(bank, fid, t, side=0):
    """Evaluate function ``fid`` at the points ``t``.

    ``side=1`` returns left limits.  Points outside the domain give NaN.
    """
    t = np.ascontiguousarray(t, dtype=float)
    coef, x, _, ok = _split(bank, fid, t, side)
    out = _poly(coef, x)
    out[~ok] = np.nan
    return out


def pw_antideriv(bank, fid, t):
    """Integral of function ``fid`` from its domain start to each ``t``."""
    t = np.ascontiguousarray(t, dtype=float)
    coef, x, off, ok = _split(bank, fid, t, 0)
    out = off + _poly_int(coef, x)
    out[~ok] = np.nan
    return out


def hermite_eval(knots, y, sl, sr, q):
    """Cubic Hermite interpolation with per-interval end slopes.

    ``sl[i]`` and ``sr[i]`` are the slopes at the left and right ends of
    interval ``i``.  Queries outside ``[knots[0], knots[-1]]`` give NaN.
    """
    q = np.ascontiguousarray(q, dtype=float)
    n = len(knots)
    i = np.clip(np.searchsorted(knots, q, side="right") - 1, 0, n - 2)
    h = knots[i + 1] - knots[i]
    s = (q - knots[i]) / h
    s2 = s * s
    s3 = s2 * s
    out = ((2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * sl[i]
           + (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * sr[i])
    out[(q < knots[0]) | (q > knots[-1])] = np.nan
    return out


# ---------------------------------------------------------------------------
# method-of-steps march


class _Scalar:
    """Scalar evaluator over a bank, used by the pure-Python march."""

    def __init__(self, bank):
        pre_lo, pre_c, pre_F, pre_off, pat_lo, pat_c, pat_F, pat_off, Tp, P, FTp, IP = bank
        self.pre_lo = pre_lo.tolist()
        self.pre_c = pre_c.tolist()
        self.pre_off = pre_off.tolist()
        self.pat_lo = pat_lo.tolist()
        self.pat_c = pat_c.tolist()
        self.pat_off = pat_off.tolist()
        self.Tp = Tp.tolist()
        self.P = P.tolist()

    def __call__(self, fid, t, side):
        tp = self.Tp[fid]
        if (t > tp) if side else (t >= tp):
            b0, b1 = self.pat_off[fid], self.pat_off[fid + 1]
            per = self.P[fid]
            u = t - tp
            k = math.floor(u / per)
            u -= k * per
            if u < 0:
                u += per
            elif u >= per:
                u -= per
            if side and u == 0:
                u = per
            if side:
                j = bisect.bisect_left(self.pat_lo, u, b0, b1) - 1
            else:
                j = bisect.bisect_right(self.pat_lo, u, b0, b1) - 1
            j = min(max(j, b0), b1 - 1)
            c = self.pat_c[j]
            x = u - self.pat_lo[j]
        else:
            a0, a1 = self.pre_off[fid], self.pre_off[fid + 1]
            if side:
                j = bisect.bisect_left(self.pre_lo, t, a0, a1) - 1
            else:
                j = bisect.bisect_right(self.pre_lo, t, a0, a1) - 1
            if j < a0:
                return math.nan
            c = self.pre_c[j]
            x = t - self.pre_lo[j]
        return c[0] + x * (c[1] + x * (c[2] + x * c[3]))


def rk4_march(bank, p_ids, d_ids, zero_flags, hist_kind, hist_params, hist_bank, grid):
    """Classical RK4 on a fixed grid for x' = -sum p_i(t) x(t - d_i(t)).

    Delayed states come from the cubic Hermite dense output of completed
    steps, or from the history for arguments ``<= grid[0]``.  Arguments in
    the current step extrapolate the last completed cubic.

    Returns ``(x, dxl, dxr, sign_violations, instep_lookups)`` where
    ``dxl[k]``/``dxr[k]`` are the derivatives at the left/right end of step k.
    """
    ev = _Scalar(bank)
    hv = _Scalar(hist_bank) if hist_kind == 2 else None
    grid = np.ascontiguousarray(grid, dtype=float)
    g = grid.tolist()
    n = len(g) - 1
    m = len(p_ids)
    t0 = g[0]
    c_h, rate_h = float(hist_params[0]), float(hist_params[1])

    def hist(s):
        if hist_kind == 0:
            return c_h
        if hist_kind == 1:
            return c_h * math.exp(-rate_h * s)
        return hv(0, s, 0)

    x = [0.0] * (n + 1)
    dxl = [0.0] * n
    dxr = [0.0] * n
    x[0] = hist(t0)
    counters = [0, 0]  # sign violations, in-step lookups

    def cubic(j, s):
        h = g[j + 1] - g[j]
        u = (s - g[j]) / h
        u2 = u * u
        u3 = u2 * u
        return ((2 * u3 - 3 * u2 + 1) * x[j] + (u3 - 2 * u2 + u) * h * dxl[j]
                + (-2 * u3 + 3 * u2) * x[j + 1] + (u3 - u2) * h * dxr[j])

    def lookup(s, k):
        if s <= t0:
            return hist(s)
        if s <= g[k]:
            j = bisect.bisect_left(g, s, 0, k + 1) - 1
            j = min(max(j, 0), k - 1)
            return cubic(j, s)
        counters[1] += 1
        if k == 0:
            return x[0]
        return cubic(k - 1, s)

    def rhs(t, xs, side, k, check):
        acc = 0.0
        allpos = True
        for i in range(m):
            pi = ev(p_ids[i], t, side)
            if zero_flags[i]:
                v = xs
            else:
                v = lookup(t - ev(d_ids[i], t, side), k)
            if v <= 0:
                allpos = False
            acc -= pi * v
        if check and allpos and acc > 1e-14 * (abs(xs) + 1e-300):
            counters[0] += 1
        return acc

    for k in range(n):
        tk = g[k]
        tk1 = g[k + 1]
        h = tk1 - tk
        xk = x[k]
        k1 = rhs(tk, xk, 0, k, False)
        tm = tk + 0.5 * h
        k2 = rhs(tm, xk + 0.5 * h * k1, 0, k, False)
        k3 = rhs(tm, xk + 0.5 * h * k2, 0, k, False)
        k4 = rhs(tk1, xk + h * k3, 1, k, False)
        x[k + 1] = xk + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        dxl[k] = k1
        dxr[k] = rhs(tk1, x[k + 1], 1, k, True)
    return (np.array(x), np.array(dxl), np.array(dxr), counters[0], counters[1])
