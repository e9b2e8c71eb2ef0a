"""Simulation drivers: single caches, lines and trees under IRM requests."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..popularity import PopularityDistribution, sample
from ..single import miss_rate_exact
from . import _kernel
from .caches import POLICY_CODES
from .topology import TopologySpec

__all__ = [
    "MissReport",
    "RunSpec",
    "ReplicationSummary",
    "default_warmup",
    "simulate",
    "run_single",
    "run_line",
    "run_tree",
    "run_replications",
    "summarize",
]

DEFAULT_RANK_CAP = 500
CHUNK = 1 << 20


@dataclass
class MissReport:
    """Counters of one simulation run.

    ``requests[l, b]`` and ``misses[l, b]`` count requests reaching level
    ``l`` (0 = leaf) and the misses there, for rank ``b + 1`` when
    ``b < rank_cap`` and for all higher ranks pooled in the last bin.
    """

    requests: np.ndarray
    misses: np.ndarray
    rank_cap: int
    warmup_requests: int
    measured_requests: int
    seed: Optional[int]
    replication_id: int = 0

    @property
    def depth(self) -> int:
        return self.requests.shape[0]

    def local_miss(self, level: int) -> float:
        """Aggregate ``M*(level)``: misses over requests reaching the level (1-based)."""
        req = self.requests[level - 1].sum()
        return float(self.misses[level - 1].sum() / req) if req else math.nan

    def global_miss(self, level: int) -> float:
        """Aggregate ``M(level)``: misses at the level over all measured requests."""
        return float(self.misses[level - 1].sum() / self.measured_requests)

    def per_rank_local(self, level: int) -> np.ndarray:
        """Local miss ratio per rank ``1..rank_cap``; NaN where no request arrived."""
        req = self.requests[level - 1, :self.rank_cap].astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(req > 0, self.misses[level - 1, :self.rank_cap] / req, np.nan)

    def per_rank_global(self, level: int) -> np.ndarray:
        req = self.requests[0, :self.rank_cap].astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(req > 0, self.misses[level - 1, :self.rank_cap] / req, np.nan)

    def aggregate(self) -> list:
        """``[(local, global)]`` per level."""
        return [(self.local_miss(l), self.global_miss(l)) for l in range(1, self.depth + 1)]


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one simulation apart from the seed."""

    dist: PopularityDistribution
    topology: TopologySpec
    warmup: Optional[int] = None
    measure: int = 10**6
    rank_cap: int = DEFAULT_RANK_CAP


def default_warmup(dist: PopularityDistribution, topology: TopologySpec) -> int:
    """``max(1e6, 200 * sum_l C_l / M_hat)`` requests.

    ``M_hat`` is the exact miss probability of one RND cache holding the
    whole path capacity, a lower bound on the miss rate reaching the top
    level.  For trees it is further divided by the smallest leaf weight,
    since a lightly used leaf fills more slowly.
    """
    total = sum(topology.level_sizes)
    n = dist.support_size
    if n is not None and total >= n:
        m_hat = 1.0 / n
    else:
        m_hat = max(miss_rate_exact(dist, total), 1e-6)
    steps = 200.0 * total / m_hat / min(topology.leaf_weights)
    return int(max(1e6, math.ceil(steps)))


def simulate(spec: RunSpec, seed: Optional[int] = None, replication_id: int = 0) -> MissReport:
    """Run ``spec`` once with ``numpy.random.default_rng(seed)``."""
    dist, topo = spec.dist, spec.topology
    if not dist.is_finite:
        raise ValueError("simulation needs a finite catalog")
    if spec.measure < 1:
        raise ValueError("measure must be >= 1")
    warmup = default_warmup(dist, topo) if spec.warmup is None else int(spec.warmup)
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    rng = np.random.default_rng(seed)
    lay = topo.layout()
    n_nodes = len(lay["parent"])
    policy = np.array([POLICY_CODES[p] for p in lay["policy"]], dtype=np.int64)
    state = _kernel.new_state(n_nodes, dist.support_size, int(lay["capacity"].max()))
    rank_cap = min(int(spec.rank_cap), dist.support_size)
    requests = np.zeros((topo.depth, rank_cap + 1), dtype=np.int64)
    misses = np.zeros_like(requests)
    leaf_p = np.array(topo.leaf_weights)
    leaf_cdf = np.cumsum(leaf_p)
    leaf_cdf[-1] = 1.0

    def serve(n: int, counting: bool) -> None:
        while n > 0:
            m = min(n, CHUNK)
            objs = (sample(dist, rng, m) - 1).astype(np.int64)
            if topo.n_leaves > 1:
                leaves = np.searchsorted(leaf_cdf, rng.random(m), side="right").astype(np.int64)
            else:
                leaves = np.zeros(m, dtype=np.int64)
            u = rng.random((m, topo.depth))
            _kernel.run_chunk(objs, leaves, u, lay["parent"], lay["level"], lay["capacity"], policy,
                              state["pos"], state["slots"], state["count"], state["ring"],
                              state["prv"], state["nxt"], state["lru_head"], state["lru_tail"],
                              requests, misses, rank_cap, counting)
            n -= m

    serve(warmup, False)
    serve(int(spec.measure), True)
    return MissReport(requests, misses, rank_cap, warmup, int(spec.measure), seed, replication_id)


def run_single(dist: PopularityDistribution, policy: str, C: int, warmup: Optional[int] = None,
               measure: int = 10**6, seed: Optional[int] = None,
               rank_cap: int = DEFAULT_RANK_CAP) -> MissReport:
    return simulate(RunSpec(dist, TopologySpec.single(policy, C), warmup, measure, rank_cap), seed)


def run_line(dist: PopularityDistribution, policies: Sequence[str], sizes: Sequence[int],
             warmup: Optional[int] = None, measure: int = 10**6, seed: Optional[int] = None,
             rank_cap: int = DEFAULT_RANK_CAP) -> MissReport:
    """In-path caching on a line: a miss at level ``l`` forwards to ``l+1`` and
    the object is copied into every level that missed."""
    return simulate(RunSpec(dist, TopologySpec.line(policies, sizes), warmup, measure, rank_cap), seed)


def run_tree(dist: PopularityDistribution, topo: TopologySpec, warmup: Optional[int] = None,
             measure: int = 10**6, seed: Optional[int] = None,
             rank_cap: int = DEFAULT_RANK_CAP) -> MissReport:
    """In-path caching on a homogeneous tree; counters are pooled over the nodes of a level."""
    return simulate(RunSpec(dist, topo, warmup, measure, rank_cap), seed)


@dataclass
class ReplicationSummary:
    """Mean, standard deviation and standard error across replications.

    Keys: ``local``/``global`` (arrays over levels) and
    ``rank_local``/``rank_global`` (levels x ranks).
    """

    n: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)


def _stats(reports: Sequence[MissReport]) -> dict:
    depth = reports[0].depth
    levels = range(1, depth + 1)
    return {
        "local": np.array([[r.local_miss(l) for l in levels] for r in reports]),
        "global": np.array([[r.global_miss(l) for l in levels] for r in reports]),
        "rank_local": np.array([[r.per_rank_local(l) for l in levels] for r in reports]),
        "rank_global": np.array([[r.per_rank_global(l) for l in levels] for r in reports]),
    }


def summarize(reports: Sequence[MissReport]) -> ReplicationSummary:
    out = ReplicationSummary(len(reports))
    for key, x in _stats(reports).items():
        # ranks never requested in a run are NaN there; all-NaN columns stay NaN
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(x, axis=0)
            std = np.nanstd(x, axis=0, ddof=1)
        n = np.sum(~np.isnan(x), axis=0)
        out.mean[key] = mean
        out.std[key] = std
        with np.errstate(invalid="ignore", divide="ignore"):
            out.stderr[key] = std / np.sqrt(n)
    return out


def _run_one(args):
    spec, seed, i = args
    return simulate(spec, seed, i)


def run_replications(spec: RunSpec, R: int, base_seed: int = 0,
                     jobs: int = 1) -> tuple[list, ReplicationSummary]:
    """``R`` independent runs seeded ``base_seed + i``, optionally in ``jobs`` processes."""
    if R < 2:
        raise ValueError("need at least 2 replications")
    tasks = [(spec, base_seed + i, i) for i in range(R)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_run_one, tasks))
    else:
        reports = [_run_one(t) for t in tasks]
    return reports, summarize(reports)
