"""Large-cache approximations for tandems and homogeneous trees of caches.

Every level is treated as fed by an independent-reference stream whose
popularity is the miss stream of the level below.  Under that assumption the
per-object local miss probability at level ``l`` depends only on

    x = C_l**alpha * M_r(l-1) / r**alpha

where ``M_r(l-1)`` is the global miss probability of rank ``r`` below level
``l`` (1 at the leaf).  RND gives ``1 / (1 + x / rho)`` and LRU gives
``exp(-x / (alpha * lam))``.  Composing these level by level yields the
all-RND, mixed RND/LRU and all-LRU formulas below.

Trees with equal sizes per level use the same formulas: the merged miss
stream reaching a parent has the same popularity whatever the leaf weights,
so leaf weights are accepted by :class:`NetworkPlan` and ignored here.

These are approximations; their accuracy is established by simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .popularity import PopularityDistribution
from .single import LRU, RND, _policy, _zipf_constant, prefactor_lru, prefactor_rnd

__all__ = [
    "NetworkPlan",
    "global_miss_per_object",
    "local_miss_per_object",
    "level_miss_per_object",
    "average_global_miss",
    "average_global_miss_sum",
    "mixed_tandem_rnd_then_lru",
    "mixed_tandem_lru_then_rnd",
    "all_lru_tandem_per_object",
]


@dataclass(frozen=True)
class NetworkPlan:
    """Per-level ``(policy, size)`` pairs, leaf first, for a Zipf(alpha) stream.

    ``leaf_weights`` only matter to the simulator and are carried along for
    tree plans.
    """

    levels: tuple
    alpha: float
    leaf_weights: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        levels = tuple((_policy(p), int(c)) for p, c in self.levels)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "alpha", float(self.alpha))
        if not levels:
            raise ValueError("a plan needs at least one level")
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        for i, (_, c) in enumerate(levels, start=1):
            if c < 1:
                raise ValueError(f"level {i}: cache size must be >= 1, got {c}")
        if len(set(self.policies)) > 1 and len(levels) != 2:
            raise ValueError("mixed-policy formulas are available for two-level tandems only")

    @classmethod
    def uniform(cls, policy: str, sizes: Sequence[int], alpha: float) -> "NetworkPlan":
        return cls(tuple((policy, c) for c in sizes), alpha)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def policies(self) -> tuple:
        return tuple(p for p, _ in self.levels)

    @property
    def sizes(self) -> tuple:
        return tuple(c for _, c in self.levels)


def _local_factor(policy: str, alpha: float, x):
    if policy == RND:
        return 1.0 / (1.0 + x / prefactor_rnd(alpha))
    return np.exp(-x / (alpha * prefactor_lru(alpha)))


def _cascade(policies: Sequence[str], sizes: Sequence[float], alpha: float, r):
    """Local and global miss of rank(s) ``r`` at every level.

    Sizes may be 0, which makes that level transparent.  Returns two arrays
    of shape ``(depth,) + shape(r)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 1):
        raise ValueError("ranks start at 1")
    log_r = alpha * np.log(r)
    glob = np.ones_like(r)
    locs, globs = [], []
    for policy, c in zip(policies, sizes):
        if c < 0:
            raise ValueError("cache sizes must be >= 0")
        if c == 0:
            loc = np.ones_like(r)
        else:
            x = np.exp(alpha * math.log(c) - log_r) * glob
            loc = _local_factor(policy, alpha, x)
        glob = glob * loc
        locs.append(loc)
        globs.append(glob)
    return np.array(locs), np.array(globs)


def _check_level(plan: NetworkPlan, level: int) -> None:
    if not 1 <= level <= plan.depth:
        raise ValueError(f"level must lie in 1..{plan.depth}, got {level}")


def _require_rnd(plan: NetworkPlan) -> None:
    if any(p != RND for p in plan.policies):
        raise ValueError("this formula covers all-RND plans; use mixed_tandem_rnd_then_lru, "
                         "mixed_tandem_lru_then_rnd, all_lru_tandem_per_object or "
                         "level_miss_per_object for other policies")


def level_miss_per_object(plan: NetworkPlan, level: int, r):
    """``(global, local)`` per-object estimates at ``level`` for any supported plan."""
    _check_level(plan, level)
    loc, glob = _cascade(plan.policies, plan.sizes, plan.alpha, r)
    return glob[level - 1], loc[level - 1]


def global_miss_per_object(plan: NetworkPlan, level: int, r):
    """All-RND global miss ``rho r**a / (rho r**a + sum_{j<=level} C_j**a)``."""
    _require_rnd(plan)
    return level_miss_per_object(plan, level, r)[0]


def local_miss_per_object(plan: NetworkPlan, level: int, r):
    """All-RND local miss ``(rho r**a + sum_{j<level} C_j**a) / (rho r**a + sum_{j<=level} C_j**a)``."""
    _require_rnd(plan)
    return level_miss_per_object(plan, level, r)[1]


def average_global_miss(plan: NetworkPlan, level: int) -> float:
    """All-RND average global miss ``A rho / (sum_{j<=level} C_j**a)**(1 - 1/a)``, clamped to 1."""
    _require_rnd(plan)
    _check_level(plan, level)
    a = plan.alpha
    total = math.fsum(float(c) ** a for c in plan.sizes[:level])
    value = _zipf_constant(a) * prefactor_rnd(a) / total ** (1.0 - 1.0 / a)
    return min(1.0, value)


def average_global_miss_sum(plan: NetworkPlan, level: int, dist: PopularityDistribution) -> float:
    """``sum_r q_r M_r(level)`` over a finite catalog, for any supported plan."""
    _check_level(plan, level)
    if not dist.is_finite:
        raise ValueError("the catalog sum needs a finite distribution")
    q = dist.probs()
    ranks = np.arange(1, len(q) + 1)
    glob = level_miss_per_object(plan, level, ranks)[0]
    return math.fsum(q * glob)


def mixed_tandem_rnd_then_lru(alpha: float, C1: int, C2: int, r):
    """RND leaf then LRU parent: ``(global, local)`` at the parent.

    ``local = exp(-rho C2**a / (a lam (rho r**a + C1**a)))`` and
    ``global = rho r**a / (rho r**a + C1**a) * local``.
    """
    loc, glob = _cascade((RND, LRU), (C1, C2), float(alpha), r)
    return glob[1], loc[1]


def mixed_tandem_lru_then_rnd(alpha: float, C1: int, C2: int, r):
    """LRU leaf then RND parent: ``(global, local)`` at the parent.

    ``global = rho r**a / (rho r**a exp(C1**a / (a lam r**a)) + C2**a)`` and
    ``local = global / exp(-C1**a / (a lam r**a))``.
    """
    loc, glob = _cascade((LRU, RND), (C1, C2), float(alpha), r)
    return glob[1], loc[1]


def all_lru_tandem_per_object(alpha: float, sizes: Sequence[int], level: int, r):
    """Reference all-LRU tandem: ``(global, local)`` at ``level``.

    Each level applies the single-cache LRU form to the miss stream of the
    level below.  This composes earlier published LRU results and is meant
    as a comparison baseline.
    """
    sizes = list(sizes)
    if not 1 <= level <= len(sizes):
        raise ValueError(f"level must lie in 1..{len(sizes)}, got {level}")
    loc, glob = _cascade([LRU] * len(sizes), sizes, float(alpha), r)
    return glob[level - 1], loc[level - 1]
