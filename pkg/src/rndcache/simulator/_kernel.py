"""Compiled inner loop of the network simulator.

State arrays are indexed ``[node, object]`` with 0-based objects:

* ``pos``: slot of the object in the node's slot array, or -1 (RND, FIFO);
  1/-1 membership flag for LRU.
* ``slots``: resident objects per node, ``count`` of them (RND, FIFO).
* ``prv``/``nxt``: doubly linked recency list per node (LRU); ``lru_head``
  is the most recent object, ``lru_tail`` the eviction candidate.
"""
from __future__ import annotations

import numba
import numpy as np

POLICY_RND = 0
POLICY_LRU = 1
POLICY_FIFO = 2


def new_state(n_nodes: int, n_objects: int, max_cap: int) -> dict:
    return {
        "pos": np.full((n_nodes, n_objects), -1, dtype=np.int32),
        "slots": np.zeros((n_nodes, max_cap), dtype=np.int32),
        "count": np.zeros(n_nodes, dtype=np.int64),
        "ring": np.zeros(n_nodes, dtype=np.int64),
        "prv": np.full((n_nodes, n_objects), -1, dtype=np.int32),
        "nxt": np.full((n_nodes, n_objects), -1, dtype=np.int32),
        "lru_head": np.full(n_nodes, -1, dtype=np.int64),
        "lru_tail": np.full(n_nodes, -1, dtype=np.int64),
    }


@numba.njit(cache=True)
def _lru_unlink(nd, obj, prv, nxt, lru_head, lru_tail):
    p = prv[nd, obj]
    n = nxt[nd, obj]
    if p >= 0:
        nxt[nd, p] = n
    else:
        lru_head[nd] = n
    if n >= 0:
        prv[nd, n] = p
    else:
        lru_tail[nd] = p
    prv[nd, obj] = -1
    nxt[nd, obj] = -1


@numba.njit(cache=True)
def _lru_push_front(nd, obj, prv, nxt, lru_head, lru_tail):
    h = lru_head[nd]
    prv[nd, obj] = -1
    nxt[nd, obj] = h
    if h >= 0:
        prv[nd, h] = obj
    else:
        lru_tail[nd] = obj
    lru_head[nd] = obj


@numba.njit(cache=True)
def run_chunk(objs, leaves, u, parent, level, capacity, policy,
              pos, slots, count, ring, prv, nxt, lru_head, lru_tail,
              requests, misses, rank_cap, counting):
    """Serve ``len(objs)`` requests; per-level per-rank counters are updated when ``counting``."""
    for i in range(objs.shape[0]):
        obj = objs[i]
        b = obj if obj < rank_cap else rank_cap
        nd = leaves[i]
        while nd >= 0:
            lv = level[nd]
            pol = policy[nd]
            if counting:
                requests[lv, b] += 1
            if pol == POLICY_LRU:
                if pos[nd, obj] >= 0:
                    if lru_head[nd] != obj:
                        _lru_unlink(nd, obj, prv, nxt, lru_head, lru_tail)
                        _lru_push_front(nd, obj, prv, nxt, lru_head, lru_tail)
                    break
                if count[nd] == capacity[nd]:
                    victim = lru_tail[nd]
                    _lru_unlink(nd, victim, prv, nxt, lru_head, lru_tail)
                    pos[nd, victim] = -1
                else:
                    count[nd] += 1
                pos[nd, obj] = 1
                _lru_push_front(nd, obj, prv, nxt, lru_head, lru_tail)
            else:
                if pos[nd, obj] >= 0:
                    break
                c = count[nd]
                cap = capacity[nd]
                if c < cap:
                    slots[nd, c] = obj
                    pos[nd, obj] = c
                    count[nd] = c + 1
                else:
                    if pol == POLICY_RND:
                        s = int(u[i, lv] * cap)
                        if s >= cap:
                            s = cap - 1
                    else:
                        s = ring[nd]
                        ring[nd] = (s + 1) % cap
                    pos[nd, slots[nd, s]] = -1
                    slots[nd, s] = obj
                    pos[nd, obj] = s
            # miss at this node: the copy was inserted above, continue upward
            if counting:
                misses[lv, b] += 1
            nd = parent[nd]
