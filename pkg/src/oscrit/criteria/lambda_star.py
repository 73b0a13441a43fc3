"""Smallest root of ``exp(p*lam) = lam``."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import NoRealRoot

INV_E = 1.0 / math.e


@dataclass(frozen=True)
class LambdaStar:
    p: float
    lam: float
    residual: float

    @property
    def value(self) -> float:
        return self.lam


def lambda_star(p: float) -> LambdaStar:
    """Smallest real root of ``exp(p*lam) = lam`` for ``0 <= p <= 1/e``.

    Bisection on ``g(lam) = p*lam - ln(lam)`` over ``[1, e]`` followed by
    a guarded Newton polish.  ``g`` is decreasing on ``[1, 1/p]`` so the
    bracket always holds the smallest root.

    Raises
    ------
    NoRealRoot
        For ``p > 1/e``.
    """
    p = float(p)
    if p < 0 or math.isnan(p):
        raise ValueError(f"p must be non-negative, got {p!r}")
    if p == 0.0:
        return LambdaStar(0.0, 1.0, 0.0)
    if p * math.e - 1.0 > 4 * 2.2e-16:
        raise NoRealRoot(f"exp({p}*lam) = lam has no real root for p > 1/e")
    if abs(p * math.e - 1.0) <= 4 * 2.2e-16:
        lam = math.e
        return LambdaStar(p, lam, abs(math.exp(p * lam) - lam))

    def g(x):
        return p * x - math.log(x)

    lo, hi = 1.0, math.e
    # g(1) = p > 0 and g(e) = p*e - 1 < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    lam = 0.5 * (lo + hi)
    for _ in range(6):
        d = p - 1.0 / lam
        if d == 0:
            break
        nxt = lam - g(lam) / d
        if not lo - 1e-15 <= nxt <= hi + 1e-15:
            break
        if abs(nxt - lam) <= 1e-17 * lam:
            lam = nxt
            break
        lam = nxt
    return LambdaStar(p, lam, abs(math.exp(p * lam) - lam))
