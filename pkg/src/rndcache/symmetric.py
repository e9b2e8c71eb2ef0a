"""Elementary symmetric functions ``G(C)`` of the popularity weights.

``G(C)`` is the coefficient of ``z**C`` in ``prod_r (1 + q_r z)``.  It decays
faster than geometrically, so values are kept as ``mantissa * 2**exponent``
pairs and only ratios are ever formed in floating point.

Two routes are available:

* ``"subset-dp"``: multiply the factors ``(1 + q_r z)`` in one by one.  Only
  positive terms are added, so the result is stable in double precision.
* ``"newton"``: for analytic families (Zipf, geometric) the product is split
  into an explicit head over the most popular ranks, computed by the DP, and
  an infinite tail whose coefficients come from Newton's identities applied
  to closed-form tail power sums.  Newton's identities alternate in sign, so
  the tail is evaluated in mpmath with a running error bound and the working
  precision is raised until the bound meets the target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import mpmath
import numpy as np

from .errors import PrecisionError
from .popularity import EXPLICIT, GEOMETRIC, ZIPF, PopularityDistribution

__all__ = ["SymmetricCoefficients", "symmetric_coefficients", "head_size"]

# target relative accuracy of the tail contribution to G(C)
_TAIL_TOL = 1e-15
_START_DPS = 30
_MAX_DPS = 20000
_MAX_HEAD = 100_000


@dataclass(frozen=True)
class SymmetricCoefficients:
    """``G(0..C_max)`` as base-2 mantissa/exponent pairs.

    ``rel_error`` is an a-posteriori bound on the relative error of every
    stored value (excluding the float head, which is accurate to a few
    hundred ulps).
    """

    mantissa: np.ndarray
    exponent: np.ndarray
    C_max: int
    source: str
    distribution: PopularityDistribution
    head: int = 0
    dps: int = 0
    rel_error: float = 0.0

    def __len__(self) -> int:
        return self.C_max + 1

    def __getitem__(self, C: int) -> float:
        return self.value(C)

    def value(self, C: int) -> float:
        """``G(C)`` as a float; underflows to 0 for very large ``C``."""
        return math.ldexp(float(self.mantissa[C]), int(self.exponent[C]))

    def log(self, C: int) -> float:
        m = float(self.mantissa[C])
        if m == 0.0:
            return -math.inf
        return math.log(m) + int(self.exponent[C]) * math.log(2.0)

    def ratio(self, C: int) -> float:
        """``G(C+1) / G(C)`` computed without leaving the scaled representation."""
        num = float(self.mantissa[C + 1])
        den = float(self.mantissa[C])
        if num == 0.0:
            return 0.0
        return math.ldexp(num / den, int(self.exponent[C + 1]) - int(self.exponent[C]))

    def mp(self, C: int):
        return mpmath.ldexp(mpmath.mpf(float(self.mantissa[C])), int(self.exponent[C]))

    @property
    def values(self) -> np.ndarray:
        return np.ldexp(self.mantissa, self.exponent.astype(np.int32))


def _head_dp(q: np.ndarray, C_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``prod (1 + q_i z)`` up to degree ``C_max``.

    Row ``c`` of the recursion, viewed as a function of how many factors have
    been multiplied in, is the cumulative sum of ``q * row_{c-1}`` shifted by
    one.  Each row is rescaled by a power of two so nothing underflows.
    """
    mant = np.zeros(C_max + 1)
    expo = np.zeros(C_max + 1, dtype=np.int64)
    mant[0] = 0.5
    expo[0] = 1
    n = len(q)
    row = np.ones(n + 1)
    row_exp = 0
    for c in range(1, C_max + 1):
        if c > n:
            break
        nxt = np.empty(n + 1)
        nxt[0] = 0.0
        np.cumsum(q * row[:-1], out=nxt[1:])
        top = nxt[-1]
        if top == 0.0:
            break
        m, e = math.frexp(top)
        nxt = np.ldexp(nxt, -e)
        row = nxt
        row_exp += e
        mant[c] = m
        expo[c] = row_exp
    return mant, expo


def head_size(dist: PopularityDistribution, C_max: int) -> int:
    """Number of ranks handled exactly before switching to the analytic tail.

    Chosen so the tail weights are small next to the tail mass times
    ``C_max``, which keeps the alternating Newton sums well conditioned.
    """
    if dist.kind == ZIPF:
        h = int(math.ceil(4.0 * (dist.alpha - 1.0) * (C_max + 1))) + 16
    elif dist.kind == GEOMETRIC:
        h = C_max + 1 + int(math.ceil(40.0 * math.log(10.0) / -math.log(dist.kappa)))
    else:
        raise TypeError("explicit distributions use the subset DP")
    h = min(h, _MAX_HEAD)
    if dist.N is not None:
        h = min(h, dist.N)
    return h


def _tail_newton(dist: PopularityDistribution, start: int, C_max: int, exclude: int = 0):
    """Tail coefficients ``T_0..T_C_max`` and absolute error bounds (mp values)."""
    u = mpmath.mpf(2) ** (-mpmath.mp.prec)
    norm = dist.normalizer_mp()
    p = [None] + [dist.tail_power_sum_mp(k, start, norm) for k in range(1, C_max + 1)]
    if exclude > start:
        qr = norm * (mpmath.mpf(exclude) ** (-mpmath.mpf(dist.alpha)) if dist.kind == ZIPF
                     else mpmath.mpf(dist.kappa) ** (exclude - 1))
        p = [None] + [p[k] - qr**k for k in range(1, C_max + 1)]
    T = [mpmath.mpf(1)]
    B = [mpmath.mpf(0)]
    for c in range(1, C_max + 1):
        s = mpmath.mpf(0)
        mag = mpmath.mpf(0)
        prop = mpmath.mpf(0)
        for k in range(1, c + 1):
            t = T[c - k] * p[k]
            if k & 1:
                s += t
            else:
                s -= t
            mag += abs(t)
            prop += B[c - k] * p[k]
        val = s / c
        T.append(val)
        B.append((prop + (c + 12) * u * mag) / c + u * abs(val))
    return T, B


def _combine(head_m, head_e, T, B, C_max: int):
    """Convolve the float head with the mp tail; return values and relative error bounds."""
    Hd = [mpmath.ldexp(mpmath.mpf(float(head_m[c])), int(head_e[c])) for c in range(C_max + 1)]
    out = []
    rel = []
    for C in range(C_max + 1):
        s = mpmath.mpf(0)
        err = mpmath.mpf(0)
        for j in range(C + 1):
            h = Hd[C - j]
            if h == 0:
                continue
            s += T[j] * h
            err += B[j] * h
        out.append(s)
        if s > 0:
            rel.append(err / s)
        elif Hd[C] == 0 and all(T[j] == 0 for j in range(C + 1)):
            rel.append(mpmath.mpf(0))
        else:
            rel.append(mpmath.inf)
    return out, rel


def _newton_route(dist: PopularityDistribution, C_max: int, head: Optional[int],
                  exclude: int = 0):
    if head is None:
        head = head_size(dist, C_max)
    head = max(head, exclude)
    q = dist.probs(head) if head > 0 else np.zeros(0)
    if exclude:
        q = np.delete(q, exclude - 1)
    head_m, head_e = _head_dp(q, C_max)
    dps = _START_DPS
    while True:
        with mpmath.workdps(dps):
            T, B = _tail_newton(dist, head, C_max, exclude=exclude)
            vals, rel = _combine(head_m, head_e, T, B, C_max)
            worst = max(rel)
            if worst <= _TAIL_TOL:
                mant = np.empty(C_max + 1)
                expo = np.empty(C_max + 1, dtype=np.int64)
                for C, v in enumerate(vals):
                    if v == 0:
                        mant[C], expo[C] = 0.0, 0
                    else:
                        m, e = mpmath.frexp(v)
                        mant[C], expo[C] = float(m), int(e)
                return mant, expo, head, dps, float(worst)
            failing = next(C for C, r in enumerate(rel) if r > _TAIL_TOL)
        if dps >= _MAX_DPS:
            raise PrecisionError(
                f"Newton identities lost too much precision at C={failing} "
                f"(relative error bound {mpmath.nstr(worst, 3)} at {dps} digits)", C=failing)
        dps *= 2


@lru_cache(maxsize=128)
def _coefficients(dist: PopularityDistribution, C_max: int, method: str,
                  head: Optional[int], exclude: int) -> SymmetricCoefficients:
    if method == "subset-dp":
        q = dist.probs()
        if exclude:
            q = np.delete(q, exclude - 1)
        mant, expo = _head_dp(q, C_max)
        return SymmetricCoefficients(mant, expo, C_max, "subset-dp", dist, head=len(q))
    mant, expo, h, dps, err = _newton_route(dist, C_max, head, exclude=exclude)
    return SymmetricCoefficients(mant, expo, C_max, "newton", dist, head=h, dps=dps,
                                 rel_error=err)


def symmetric_coefficients(dist: PopularityDistribution, C_max: int, method: str = "auto",
                           head: Optional[int] = None, exclude: int = 0) -> SymmetricCoefficients:
    """Compute ``G(0..C_max)`` for ``dist``.

    Parameters
    ----------
    dist : PopularityDistribution
    C_max : int
        Largest degree wanted.  For a finite catalog of size ``N`` degrees
        above ``N`` are exactly zero.
    method : {"auto", "subset-dp", "newton"}
        ``"auto"`` uses the DP for finite catalogs and Newton's identities for
        unbounded ones.
    head : int, optional
        Newton route only: number of leading ranks multiplied in exactly.
        ``0`` applies Newton's identities to the full power sums.
    exclude : int, optional
        Drop rank ``exclude`` from the product (gives ``G_r`` of the
        per-object miss formula).

    Raises
    ------
    PrecisionError
        If Newton's identities cannot reach the accuracy target.
    """
    C_max = int(C_max)
    if C_max < 0:
        raise ValueError("C_max must be >= 0")
    if method == "auto":
        method = "subset-dp" if dist.is_finite and dist.support_size <= 10**6 else "newton"
    if method not in ("subset-dp", "newton"):
        raise ValueError(f"unknown method {method!r}")
    if method == "subset-dp" and not dist.is_finite:
        raise ValueError("the subset DP needs a finite catalog")
    if method == "newton" and dist.kind == EXPLICIT:
        raise ValueError("explicit weights have no analytic power sums; use the subset DP")
    n = dist.support_size
    if exclude and (exclude < 1 or (n is not None and exclude > n)):
        raise ValueError(f"rank {exclude} outside the support")
    return _coefficients(dist, C_max, method, head, int(exclude))
