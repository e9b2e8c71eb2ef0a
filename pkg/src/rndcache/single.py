"""Miss probabilities of a single RND (equivalently FIFO) cache under IRM.

Exact values come from the symmetric functions ``G(C)``; large-cache
asymptotics and the LRU reference formulas are closed forms in the Zipf
exponent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import mpmath
import numpy as np
from scipy import special

from .errors import NoRootError
from .popularity import GEOMETRIC, ZIPF, PopularityDistribution
from .symmetric import head_size, symmetric_coefficients

__all__ = [
    "AsymptoticEstimate",
    "SaddlePoint",
    "miss_rate_exact",
    "miss_rates_exact",
    "per_object_miss_exact",
    "per_object_miss_curve",
    "per_object_miss_expansion",
    "miss_rate_geometric",
    "miss_rate_zipf_closed",
    "prefactor_rnd",
    "prefactor_lru",
    "miss_rate_asymptotic",
    "per_object_miss_asymptotic",
    "saddle_point",
    "saddle_point_expansion",
    "saddle_function",
    "per_object_miss_saddle",
    "miss_rate_lru_light_tail",
]

EULER_GAMMA = 0.5772156649015329
RND = "RND"
LRU = "LRU"
FIFO = "FIFO"

# amplification of rounding errors tolerated in the per-object recurrence
_MAX_AMPLIFICATION = 100.0


@dataclass(frozen=True)
class AsymptoticEstimate:
    value: float
    regime_note: str

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SaddlePoint:
    theta: float
    residual: float
    iterations: int = 0


def _policy(policy: str) -> str:
    p = policy.upper()
    if p == FIFO:
        return RND
    if p not in (RND, LRU):
        raise ValueError(f"unknown policy {policy!r}; expected RND, FIFO or LRU")
    return p


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


# --------------------------------------------------------------------- exact


def miss_rates_exact(dist: PopularityDistribution, C_max: int, method: str = "auto") -> np.ndarray:
    """``M(0), ..., M(C_max)`` from one coefficient computation."""
    C_max = int(C_max)
    if C_max < 0:
        raise ValueError("cache size must be >= 0")
    n = dist.support_size
    top = C_max + 1 if n is None else min(C_max + 1, n + 1)
    G = symmetric_coefficients(dist, top, method=method)
    out = np.zeros(C_max + 1)
    out[0] = 1.0
    for C in range(1, C_max + 1):
        if n is not None and C >= n:
            break
        out[C] = (C + 1) * G.ratio(C)
    return out


def miss_rate_exact(dist: PopularityDistribution, C: int, method: str = "auto") -> float:
    """Stationary miss probability ``M(C) = (C+1) G(C+1) / G(C)``."""
    C = int(C)
    if C < 0:
        raise ValueError("cache size must be >= 0")
    n = dist.support_size
    if n is not None and C >= n:
        return 0.0
    if C == 0:
        return 1.0
    G = symmetric_coefficients(dist, C + 1, method=method)
    return (C + 1) * G.ratio(C)


def _exclusion_ratio(dist: PopularityDistribution, C: int, r: int) -> float:
    """``G_r(C) / G(C)`` with both computed by the positive (exclusion) route."""
    if dist.is_finite and dist.support_size <= 10**6:
        G = symmetric_coefficients(dist, C, method="subset-dp")
        Gr = symmetric_coefficients(dist, C, method="subset-dp", exclude=r)
    else:
        h = max(head_size(dist, C), r)
        G = symmetric_coefficients(dist, C, method="newton", head=h)
        Gr = symmetric_coefficients(dist, C, method="newton", head=h, exclude=r)
    if Gr.mantissa[C] == 0.0:
        return 0.0
    return math.ldexp(float(Gr.mantissa[C]) / float(G.mantissa[C]),
                      int(Gr.exponent[C]) - int(G.exponent[C]))


def per_object_miss_curve(dist: PopularityDistribution, C: int,
                          ranks: Iterable[int]) -> np.ndarray:
    """``M_r(C)`` for several ranks at once.

    Uses ``M_r(c) = 1 - c q_r M_r(c-1) / M(c-1)``, the scale-free form of
    ``G_r(c) = G(c) - q_r G_r(c-1)``.  Ranks for which that recurrence would
    amplify rounding errors by more than a factor 100 are recomputed from the
    coefficients of the product with rank ``r`` left out.
    """
    C = int(C)
    ranks = np.atleast_1d(np.asarray(list(ranks) if not isinstance(ranks, np.ndarray) else ranks,
                                     dtype=np.int64))
    if C < 0:
        raise ValueError("cache size must be >= 0")
    if np.any(ranks < 1):
        raise ValueError("ranks start at 1")
    n = dist.support_size
    if n is not None and np.any(ranks > n):
        raise ValueError("rank outside the catalog")
    if C == 0:
        return np.ones(len(ranks))
    if n is not None and C >= n:
        return np.zeros(len(ranks))
    M = miss_rates_exact(dist, C - 1)
    q = np.array([dist.prob(int(r)) for r in ranks])
    m = np.ones(len(ranks))
    amp = np.ones(len(ranks))
    # overflowing ranks are recomputed below
    with np.errstate(over="ignore", invalid="ignore"):
        for c in range(1, C + 1):
            step = c * q / M[c - 1]
            m = 1.0 - step * m
            amp *= np.maximum(step, 1.0)
    amp[np.isnan(amp)] = np.inf
    for i in np.flatnonzero(amp > _MAX_AMPLIFICATION):
        m[i] = _exclusion_ratio(dist, C, int(ranks[i]))
    return np.clip(m, 0.0, 1.0)


def per_object_miss_exact(dist: PopularityDistribution, C: int, r: int) -> float:
    """``M_r(C)``: probability that object ``r`` is absent from the cache."""
    return float(per_object_miss_curve(dist, C, [r])[0])


def per_object_miss_expansion(dist: PopularityDistribution, C: int, r: int) -> float:
    """Alternating expansion ``1 + sum_l (-q_r)**(C-l) G(l)/G(C)``.

    Kept as an independent cross-check for small ``C``; it cancels badly
    once ``q_r G(l)/G(C)`` grows large.
    """
    G = symmetric_coefficients(dist, C)
    qr = mpmath.mpf(dist.prob(r))
    with mpmath.workdps(40):
        gC = G.mp(C)
        total = mpmath.mpf(1)
        for ell in range(C):
            total += (-qr) ** (C - ell) * G.mp(ell) / gC
        return float(total)


# -------------------------------------------------------------- closed forms


def miss_rate_geometric(kappa: float, C: int) -> float:
    """Geometric popularity: ``M(C) = (1-k)/(1-k**(C+1)) (C+1) k**C``."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    if C < 0:
        raise ValueError("cache size must be >= 0")
    return (1.0 - kappa) / (1.0 - kappa ** (C + 1)) * (C + 1) * kappa**C


def miss_rate_zipf_closed(alpha: int, C: int) -> float:
    """Rational closed forms of ``M(C)`` for Zipf exponents 2, 4 and 6."""
    if C < 0:
        raise ValueError("cache size must be >= 0")
    if alpha == 2:
        return 3.0 / (2 * C + 3)
    if alpha == 4:
        return 45.0 / ((4 * C + 5) * (4 * C + 3) * (2 * C + 3))
    if alpha == 6:
        den = 1
        for j in range(4, 10):
            den *= 6 * C + j
        return (math.factorial(9) // math.factorial(3)) * (C + 1) / den
    raise ValueError(f"no closed form for alpha={alpha}; available for 2, 4 and 6")


# ------------------------------------------------------------- asymptotics


def prefactor_rnd(alpha: float) -> float:
    """``rho_alpha = ((pi/alpha) / sin(pi/alpha))**alpha``."""
    if not alpha > 1.0:
        raise ValueError("alpha must exceed 1")
    x = math.pi / alpha
    return (x / math.sin(x)) ** alpha


def prefactor_lru(alpha: float) -> float:
    """``lambda_alpha = Gamma(1 - 1/alpha)**alpha / alpha``."""
    if not alpha > 1.0:
        raise ValueError("alpha must exceed 1")
    return math.exp(alpha * math.lgamma(1.0 - 1.0 / alpha)) / alpha


def _zipf_constant(alpha: float) -> float:
    return 1.0 / float(special.zeta(alpha))


def miss_rate_asymptotic(policy: str, alpha: float, C: int) -> AsymptoticEstimate:
    """Large-cache miss probability ``A * prefactor * C**(1-alpha)`` for Zipf."""
    policy = _policy(policy)
    if not alpha > 1.0:
        raise ValueError("alpha must exceed 1")
    if C < 1:
        raise ValueError("cache size must be >= 1")
    pref = prefactor_rnd(alpha) if policy == RND else prefactor_lru(alpha)
    value = _zipf_constant(alpha) * pref * float(C) ** (1.0 - alpha)
    return AsymptoticEstimate(_clamp(value), f"{policy} Zipf")


def per_object_miss_asymptotic(policy: str, alpha: float, C: float, r: float) -> AsymptoticEstimate:
    """Per-rank large-cache estimate.

    RND: ``rho r**a / (C**a + rho r**a)``; LRU: ``exp(-C**a / (a lambda r**a))``.
    """
    policy = _policy(policy)
    if not alpha > 1.0:
        raise ValueError("alpha must exceed 1")
    if C < 1 or r < 1:
        raise ValueError("cache size and rank must be >= 1")
    # (C/r)**alpha via logs keeps huge ranks finite
    x = math.exp(alpha * (math.log(C) - math.log(r)))
    if policy == RND:
        value = 1.0 / (1.0 + x / prefactor_rnd(alpha))
        note = "RND Zipf per-object"
    else:
        value = math.exp(-x / (alpha * prefactor_lru(alpha)))
        note = "LRU Zipf per-object"
    return AsymptoticEstimate(_clamp(value), note)


def miss_rate_lru_light_tail(A: float, B: float, beta: float, C: int) -> AsymptoticEstimate:
    """LRU under ``q_r = A exp(-B r**beta)``: ``e**gamma/(beta B) C**(1-beta) q_C``."""
    if A <= 0 or B <= 0 or beta <= 0:
        raise ValueError("A, B and beta must be positive")
    if C < 1:
        raise ValueError("cache size must be >= 1")
    qC = A * math.exp(-B * float(C) ** beta)
    value = math.exp(EULER_GAMMA) / (beta * B) * float(C) ** (1.0 - beta) * qC
    return AsymptoticEstimate(_clamp(value), "LRU light-tail")


# ------------------------------------------------------------- saddle point


def _scaled_hurwitz(s: np.ndarray, a: int) -> np.ndarray:
    """``a**s * zeta(s, a)``, finite even where ``zeta(s, a)`` underflows."""
    out = np.empty(len(s))
    direct = s * math.log(a) < 600.0
    out[direct] = special.zeta(s[direct], a) * np.exp(s[direct] * math.log(a))
    for i in np.flatnonzero(~direct):
        si = s[i]
        K = int(math.ceil(45.0 * a / si)) + 2
        j = np.arange(0, K + 1, dtype=float)
        head = np.exp(-si * np.log1p(j / a))
        rest = a / (si - 1.0) * math.exp(-(si - 1.0) * math.log1p((K + 0.5) / a))
        out[i] = math.fsum(head[::-1]) + rest
    return out


def _zipf_tail_terms(A: float, alpha: float, z: float, start: int, derivative: bool) -> float:
    """``sum_{j > start}`` of ``q z/(1+q z)`` (or its z-derivative) as a series in Hurwitz zeta.

    Requires ``x = A z / (start+1)**alpha <= 1/2`` so the series converges fast.
    """
    a = start + 1
    m = np.arange(0, 60)
    s = alpha * (m + 1)
    x = A * z * float(a) ** (-alpha)
    scaled = _scaled_hurwitz(s, a)
    signs = np.where(m % 2 == 0, 1.0, -1.0)
    if derivative:
        # d/dz of (A z)**(m+1) zeta(s, a) = (m+1) A x**m a**(-alpha) a**(...)
        terms = signs * (m + 1) * x**m * scaled * A * float(a) ** (-alpha)
    else:
        terms = signs * x ** (m + 1) * scaled
    return float(math.fsum(terms))


def saddle_function(dist: PopularityDistribution, z: float) -> tuple[float, float]:
    """``g(z) = sum_j q_j z / (1 + q_j z)`` and ``g'(z)``."""
    if dist.is_finite:
        q = dist.probs()
        qz = q * z
        return float(math.fsum(qz / (1.0 + qz))), float(math.fsum(q / (1.0 + qz) ** 2))
    if dist.kind == ZIPF:
        A, a = dist.normalizer, dist.alpha
        J = max(1, int(math.ceil((2.0 * A * z) ** (1.0 / a))))
        q = dist.probs(J)
        qz = q * z
        g = math.fsum(qz / (1.0 + qz)) + _zipf_tail_terms(A, a, z, J, False)
        dg = math.fsum(q / (1.0 + qz) ** 2) + _zipf_tail_terms(A, a, z, J, True)
        return g, dg
    if dist.kind == GEOMETRIC:
        k = dist.kappa
        # ranks beyond R contribute less than 1e-18 relative
        R = int(math.ceil((math.log(1e-18) - math.log(max(dist.normalizer * z, 1e-300)))
                          / math.log(k))) + 2
        q = dist.probs(max(R, 1))
        qz = q * z
        return float(math.fsum(qz / (1.0 + qz))), float(math.fsum(q / (1.0 + qz) ** 2))
    raise TypeError(f"unsupported distribution kind {dist.kind}")


def saddle_point(dist: PopularityDistribution, C: int, rtol: float = 1e-9,
                 max_iter: int = 200) -> SaddlePoint:
    """Unique positive root ``theta_C`` of ``g(z) = C``.

    ``g`` is strictly increasing and concave, with ``g(z) <= z``; so the root
    is bracketed in ``[C, hi]`` and Newton steps are safeguarded by bisection.
    """
    C = int(C)
    if C < 1:
        raise ValueError("cache size must be >= 1")
    n = dist.support_size
    if n is not None and C >= n:
        raise NoRootError(f"no root: g(z) < {n} <= C={C} for every z")
    lo = float(C)
    if dist.kind == ZIPF:
        hi = 2.0 * C**dist.alpha / (dist.normalizer * prefactor_rnd(dist.alpha))
    else:
        hi = 2.0 * lo
    hi = max(hi, 2.0 * lo)
    while saddle_function(dist, hi)[0] < C:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise NoRootError(f"could not bracket the root for C={C}")
    x = math.sqrt(lo * hi)
    target = rtol * C * 1e-3
    for it in range(1, max_iter + 1):
        g, dg = saddle_function(dist, x)
        f = g - C
        if abs(f) <= target:
            break
        if f > 0:
            hi = x
        else:
            lo = x
        step = x - f / dg if dg > 0 else -1.0
        x = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            break
    residual = abs(saddle_function(dist, x)[0] - C)
    return SaddlePoint(theta=x, residual=residual, iterations=it)


def saddle_point_expansion(alpha: float, C: float, second_order: bool = True) -> float:
    """Large-``C`` expansion ``C**a/(A rho) + C**(a-1) a/(2 rho A)`` (diagnostic only).

    For ``alpha == 2`` the correction is only ``O(log C)`` and is omitted.
    """
    A = _zipf_constant(alpha)
    rho = prefactor_rnd(alpha)
    theta = C**alpha / (A * rho)
    if second_order and alpha != 2:
        theta += C ** (alpha - 1.0) * alpha / (2.0 * rho * A)
    return theta


def per_object_miss_saddle(dist: PopularityDistribution, C: int, r: int) -> float:
    """Generic per-object estimate ``1 / (1 + q_r theta_C)``."""
    theta = saddle_point(dist, C).theta
    return 1.0 / (1.0 + dist.prob(r) * theta)
