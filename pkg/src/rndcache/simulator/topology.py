"""Cache network layouts: a single cache, a line of caches, or a homogeneous tree."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .caches import normalize_policy

__all__ = ["SINGLE", "LINE", "TREE", "TopologySpec"]

SINGLE = "single"
LINE = "line"
TREE = "tree"


@dataclass(frozen=True)
class TopologySpec:
    """Level-wise description of a cache network, leaf level first.

    All nodes on a level share the policy and size of that level.  Requests
    enter at leaf ``j`` with probability ``leaf_weights[j]`` and climb toward
    the root until they hit; a miss at the root goes to the repository.

    For trees, ``arity`` is the number of children per node; the leaf count
    must equal ``arity**(depth-1)``.
    """

    shape: str
    level_policies: tuple
    level_sizes: tuple
    leaf_weights: tuple = (1.0,)
    arity: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "level_policies",
                           tuple(normalize_policy(p) for p in self.level_policies))
        object.__setattr__(self, "level_sizes", tuple(int(c) for c in self.level_sizes))
        object.__setattr__(self, "leaf_weights", tuple(float(w) for w in self.leaf_weights))
        if self.shape not in (SINGLE, LINE, TREE):
            raise ValueError(f"unknown shape {self.shape!r}")
        K = len(self.level_sizes)
        if K == 0 or len(self.level_policies) != K:
            raise ValueError("need one policy per level and at least one level")
        if any(c < 1 for c in self.level_sizes):
            raise ValueError("cache sizes must be >= 1")
        if self.shape == SINGLE and K != 1:
            raise ValueError("a single cache has exactly one level")
        w = self.leaf_weights
        if any(not x > 0 for x in w):
            raise ValueError("leaf weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"leaf weights must sum to 1, got {math.fsum(w)!r}")
        if self.shape != TREE and len(w) != 1:
            raise ValueError("only trees have several leaves")
        if self.shape == TREE:
            J = len(w)
            if K == 1:
                if J != 1:
                    raise ValueError("a one-level tree has a single node")
            else:
                a = self.arity
                if a is None:
                    a = int(round(J ** (1.0 / (K - 1))))
                    object.__setattr__(self, "arity", a)
                if a < 1 or a ** (K - 1) != J:
                    raise ValueError(f"{J} leaves do not form a homogeneous tree of depth {K}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def single(cls, policy: str, C: int) -> "TopologySpec":
        return cls(SINGLE, (policy,), (C,))

    @classmethod
    def line(cls, policies: Sequence[str], sizes: Sequence[int]) -> "TopologySpec":
        return cls(LINE, tuple(policies), tuple(sizes))

    @classmethod
    def tree(cls, policies: Sequence[str], sizes: Sequence[int],
             leaf_weights: Sequence[float], arity: Optional[int] = None) -> "TopologySpec":
        return cls(TREE, tuple(policies), tuple(sizes), tuple(leaf_weights), arity)

    # -- derived layout -----------------------------------------------------

    @property
    def depth(self) -> int:
        return len(self.level_sizes)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_weights)

    def nodes_per_level(self) -> list:
        J = self.n_leaves
        a = self.arity or 1
        return [J // a**i for i in range(self.depth)]

    def layout(self) -> dict:
        """Flat node arrays: parent (-1 at the root), level, capacity, policy name.

        Nodes are numbered level by level starting with the leaves; node ``i``
        of level ``l`` has parent ``i // arity`` on level ``l + 1``.
        """
        counts = self.nodes_per_level()
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        parent, level, cap, pol = [], [], [], []
        a = self.arity or 1
        for l, n in enumerate(counts):
            for i in range(n):
                parent.append(-1 if l == self.depth - 1 else offsets[l + 1] + i // a)
                level.append(l)
                cap.append(self.level_sizes[l])
                pol.append(self.level_policies[l])
        return {"parent": np.array(parent, dtype=np.int64), "level": np.array(level, dtype=np.int64),
                "capacity": np.array(cap, dtype=np.int64), "policy": pol}
