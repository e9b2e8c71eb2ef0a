"""Reference (pure Python) cache containers.

The simulation kernel in ``_kernel`` uses flat arrays for speed; these
classes implement the same replacement rules one access at a time and are
used for unit tests and step-by-step experiments.  Given the same eviction
uniform ``u`` both choose the same victim.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["RND", "LRU", "FIFO", "POLICIES", "POLICY_CODES", "CacheState", "cache_access"]

RND = "RND"
LRU = "LRU"
FIFO = "FIFO"
POLICIES = (RND, LRU, FIFO)
POLICY_CODES = {RND: 0, LRU: 1, FIFO: 2}


def normalize_policy(policy: str) -> str:
    p = str(policy).upper()
    if p not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
    return p


@dataclass
class CacheState:
    """One cache: ``policy``, ``capacity`` and its resident objects.

    RND keeps an unordered slot array, FIFO a ring buffer over the same
    array, LRU an ordered dict with the most recent object last.  ``index``
    maps resident objects to their slot (RND/FIFO).
    """

    policy: str
    capacity: int
    slots: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    head: int = 0
    recency: OrderedDict = field(default_factory=OrderedDict)

    def __post_init__(self):
        self.policy = normalize_policy(self.policy)
        if int(self.capacity) < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(self.capacity)

    def __contains__(self, obj: int) -> bool:
        if self.policy == LRU:
            return obj in self.recency
        return obj in self.index

    def __len__(self) -> int:
        return len(self.recency) if self.policy == LRU else len(self.slots)

    def residents(self) -> list:
        """Resident objects; for LRU most recent first, for FIFO oldest first."""
        if self.policy == LRU:
            return list(reversed(self.recency))
        if self.policy == FIFO and len(self.slots) == self.capacity:
            return self.slots[self.head:] + self.slots[:self.head]
        return list(self.slots)

    def check(self) -> None:
        """Assert the container invariants."""
        assert len(self) <= self.capacity
        if self.policy == LRU:
            return
        assert len(set(self.slots)) == len(self.slots)
        assert len(self.index) == len(self.slots)
        for i, obj in enumerate(self.slots):
            assert self.index[obj] == i


def cache_access(cache: CacheState, obj: int, rng: Optional[np.random.Generator] = None,
                 u: Optional[float] = None) -> bool:
    """Request ``obj``; returns True on a hit.

    On a miss the object is inserted, evicting a victim when the cache is
    full.  RND draws the victim slot as ``int(u * capacity)`` with ``u`` taken
    from ``rng`` (or passed in directly).
    """
    if obj < 1:
        raise ValueError("objects are ranks >= 1")
    if cache.policy == LRU:
        if obj in cache.recency:
            cache.recency.move_to_end(obj)
            return True
        if len(cache.recency) == cache.capacity:
            cache.recency.popitem(last=False)
        cache.recency[obj] = None
        return False
    if obj in cache.index:
        return True
    if len(cache.slots) < cache.capacity:
        cache.index[obj] = len(cache.slots)
        cache.slots.append(obj)
        return False
    if cache.policy == RND:
        if u is None:
            if rng is None:
                raise ValueError("RND eviction needs rng or u")
            u = rng.random()
        slot = min(int(u * cache.capacity), cache.capacity - 1)
    else:
        slot = cache.head
        cache.head = (cache.head + 1) % cache.capacity
    del cache.index[cache.slots[slot]]
    cache.slots[slot] = obj
    cache.index[obj] = slot
    return False
