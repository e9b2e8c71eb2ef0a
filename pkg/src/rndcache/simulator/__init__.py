"""Discrete-time simulation of caches and in-path caching networks."""
from .caches import FIFO, LRU, RND, CacheState, cache_access
from .runner import (MissReport, ReplicationSummary, RunSpec, default_warmup, run_line,
                     run_replications, run_single, run_tree, simulate, summarize)
from .topology import TopologySpec

__all__ = [
    "RND", "LRU", "FIFO", "CacheState", "cache_access", "TopologySpec", "MissReport",
    "RunSpec", "ReplicationSummary", "default_warmup", "simulate", "summarize", "run_single",
    "run_line", "run_tree", "run_replications",
]
