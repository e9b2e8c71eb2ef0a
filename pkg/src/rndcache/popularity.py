"""Object popularity laws used by the analytic models and the simulator.

Ranks are 1-based throughout: rank 1 is the most popular object.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import mpmath
import numpy as np
from scipy import special

__all__ = [
    "PopularityDistribution",
    "make_zipf",
    "make_geometric",
    "make_explicit",
    "sample",
    "miss_filtered",
    "power_sum",
]

ZIPF = "zipf"
GEOMETRIC = "geometric"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class PopularityDistribution:
    """Request probabilities ``q_r`` over object ranks ``r >= 1``.

    Instances are immutable and cheap to share; the per-rank arrays used for
    sampling are built lazily and cached on first use.
    """

    kind: str
    alpha: Optional[float] = None
    N: Optional[int] = None
    kappa: Optional[float] = None
    weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    normalizer: float = 1.0
    # content hash standing in for ``weights`` in equality and hashing
    digest: Optional[str] = field(default=None, repr=False)

    @property
    def support_size(self) -> Optional[int]:
        """Number of objects, or ``None`` for unbounded support."""
        if self.kind == EXPLICIT:
            return len(self.weights)
        return self.N

    @property
    def is_finite(self) -> bool:
        return self.support_size is not None

    def prob(self, r: int) -> float:
        """Probability of rank ``r``; zero outside a finite support."""
        if r < 1:
            raise ValueError(f"rank must be >= 1, got {r}")
        n = self.support_size
        if n is not None and r > n:
            return 0.0
        if self.kind == ZIPF:
            return self.normalizer * float(r) ** (-self.alpha)
        if self.kind == GEOMETRIC:
            return self.normalizer * self.kappa ** (r - 1)
        return float(self.weights[r - 1])

    def probs(self, n: Optional[int] = None) -> np.ndarray:
        """Vector ``(q_1, ..., q_n)``; ``n`` defaults to the whole finite support."""
        size = self.support_size
        if n is None:
            if size is None:
                raise ValueError("infinite support: pass the number of ranks wanted")
            n = size
        elif size is not None:
            n = min(n, size)
        if self.kind == EXPLICIT:
            return np.asarray(self.weights[:n], dtype=float)
        ranks = np.arange(1, n + 1, dtype=float)
        if self.kind == ZIPF:
            return self.normalizer * ranks ** (-self.alpha)
        return self.normalizer * self.kappa ** (ranks - 1.0)

    @cached_property
    def _alias(self) -> tuple[np.ndarray, np.ndarray]:
        return _alias_table(self.probs())

    # -- high-precision helpers used by the symmetric-function code --------

    def normalizer_mp(self):
        """Normalizer evaluated in the current ``mpmath.mp`` precision."""
        if self.kind == ZIPF:
            a = mpmath.mpf(self.alpha)
            if self.N is None:
                return 1 / mpmath.zeta(a)
            return 1 / _zipf_partial_sum_mp(a, self.N)
        if self.kind == GEOMETRIC:
            return 1 - mpmath.mpf(self.kappa)
        # explicit weights are stored already normalized
        return mpmath.mpf(1)

    def tail_power_sum_mp(self, k: int, start: int, norm=None):
        """``sum_{r > start} q_r**k`` in the current mp precision.

        Only available for analytic families (Zipf, geometric).
        """
        if norm is None:
            norm = self.normalizer_mp()
        if self.kind == ZIPF:
            s = k * mpmath.mpf(self.alpha)
            if self.N is not None and start >= self.N:
                return mpmath.mpf(0)
            tail = mpmath.zeta(s, start + 1)
            if self.N is not None:
                tail -= mpmath.zeta(s, self.N + 1)
            return norm**k * tail
        if self.kind == GEOMETRIC:
            kap = mpmath.mpf(self.kappa)
            return norm**k * kap ** (k * start) / (1 - kap**k)
        raise TypeError("explicit distributions have no analytic power sums")


def _zipf_partial_sum_mp(a, n: int):
    if n <= 2000:
        return mpmath.fsum(mpmath.mpf(r) ** (-a) for r in range(1, n + 1))
    return mpmath.zeta(a) - mpmath.zeta(a, n + 1)


def _zipf_normalizer(alpha: float, N: Optional[int]) -> float:
    if N is None:
        return 1.0 / float(special.zeta(alpha))
    if N <= 10**6:
        ranks = np.arange(1, N + 1, dtype=float)
        # smallest terms first for the compensated sum
        return 1.0 / math.fsum((ranks ** (-alpha))[::-1])
    return 1.0 / float(special.zeta(alpha) - special.zeta(alpha, N + 1))


def make_zipf(alpha: float, N: Optional[int] = None) -> PopularityDistribution:
    """Zipf law ``q_r = A / r**alpha`` on ``1..N`` (``N=None``: all ranks).

    ``A`` is ``1/zeta(alpha)`` for unbounded support and the reciprocal of the
    generalized harmonic number for a finite catalog.
    """
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ValueError(f"Zipf exponent must exceed 1, got {alpha}")
    if N is not None:
        N = int(N)
        if N < 1:
            raise ValueError(f"catalog size must be >= 1, got {N}")
    return PopularityDistribution(ZIPF, alpha=alpha, N=N, normalizer=_zipf_normalizer(alpha, N))


def make_geometric(kappa: float) -> PopularityDistribution:
    """Geometric law ``q_r = (1 - kappa) kappa**(r-1)``, ``r >= 1``."""
    kappa = float(kappa)
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    return PopularityDistribution(GEOMETRIC, kappa=kappa, normalizer=1.0 - kappa)


def make_explicit(weights: Sequence[float], sort: bool = True) -> PopularityDistribution:
    """Finite distribution proportional to ``weights``.

    Weights are sorted into non-increasing order unless ``sort`` is false, in
    which case position ``i`` keeps labelling object ``i + 1`` (used for
    miss-filtered streams, whose rank order is not monotone).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be finite and strictly positive")
    if sort:
        w = np.sort(w)[::-1]
    total = math.fsum(w)
    q = w / total
    q.setflags(write=False)
    digest = hashlib.sha1(q.tobytes()).hexdigest()
    return PopularityDistribution(EXPLICIT, weights=q, normalizer=1.0 / total, digest=digest)


def _alias_table(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table: returns (acceptance threshold, alias index), 0-based."""
    n = len(q)
    scaled = np.asarray(q, dtype=float) * n
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large[-1]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        if scaled[g] < 1.0:
            large.pop()
            small.append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        scaled[i] = 1.0
    return scaled, alias


def sample(dist: PopularityDistribution, rng: np.random.Generator,
           size: Optional[int] = None) -> Union[int, np.ndarray]:
    """Draw rank(s) with probability ``q_r`` using one uniform per draw (alias method)."""
    if not dist.is_finite:
        raise ValueError("sampling needs a finite catalog; use make_zipf(alpha, N)")
    threshold, alias = dist._alias
    n = len(threshold)
    u = rng.random(size) * n
    idx = u.astype(np.int64)
    np.minimum(idx, n - 1, out=idx)
    frac = u - idx
    ranks = np.where(frac < threshold[idx], idx, alias[idx]) + 1
    if size is None:
        return int(ranks)
    return ranks


def miss_filtered(dist: PopularityDistribution,
                  per_object_miss: Union[Callable[[int], float], Sequence[float]],
                  avg_miss: float, tol: float = 1e-9) -> PopularityDistribution:
    """Popularity of the miss stream, ``q_r M_r / M``.

    ``per_object_miss`` is either a callable on ranks or a sequence indexed
    from rank 1.  ``avg_miss`` must equal ``sum_r q_r M_r`` within ``tol``.
    """
    if not dist.is_finite:
        raise ValueError("miss filtering is defined here for finite catalogs only")
    q = dist.probs()
    if callable(per_object_miss):
        m = np.array([per_object_miss(r) for r in range(1, len(q) + 1)], dtype=float)
    else:
        m = np.asarray(per_object_miss, dtype=float)
        if m.shape != q.shape:
            raise ValueError(f"expected {len(q)} per-object miss values, got {m.shape}")
    mean = math.fsum(q * m)
    if abs(mean - avg_miss) > tol:
        raise ValueError(
            f"avg_miss={avg_miss!r} inconsistent with per-object values (weighted mean {mean!r})")
    if avg_miss <= 0:
        raise ValueError("avg_miss must be positive: nothing leaves the cache")
    return make_explicit(q * m / avg_miss, sort=False)


def power_sum(dist: PopularityDistribution, k: int) -> float:
    """``sum_r q_r**k``."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if dist.kind == ZIPF:
        s = k * dist.alpha
        if dist.N is None:
            total = float(special.zeta(s))
        elif dist.N <= 10**5:
            ranks = np.arange(dist.N, 0, -1, dtype=float)
            total = math.fsum(ranks ** (-s))
        else:
            total = float(special.zeta(s) - special.zeta(s, dist.N + 1))
        return dist.normalizer**k * total
    if dist.kind == GEOMETRIC:
        kap = dist.kappa
        return (1.0 - kap) ** k / (1.0 - kap**k)
    q = dist.probs()
    return math.fsum((q**k)[::-1])
