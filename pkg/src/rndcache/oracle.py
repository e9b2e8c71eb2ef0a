"""Brute-force ground truth for tiny RND caches.

The cache content is a Markov chain on the ``C``-subsets of the catalog.
From state ``s`` a request for ``r`` (probability ``q_r``) leaves ``s``
unchanged if ``r`` is in ``s``; otherwise ``r`` replaces one of the ``C``
residents chosen uniformly.  The functions here build that chain explicitly
and solve it without using the product-form result they are meant to check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import PrecisionError
from .popularity import PopularityDistribution

__all__ = [
    "MAX_STATES",
    "StateSpace",
    "build_state_space",
    "stationary_bruteforce",
    "product_form",
    "miss_rate_subsets",
    "miss_rate_stationary",
    "reversibility_check",
    "total_variation",
]

MAX_STATES = 100_000
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class StateSpace:
    """All ``C``-subsets of ranks ``1..N`` with the RND transition matrix.

    ``states[i]`` is a sorted tuple of ranks and ``transition`` a CSR matrix
    whose row ``i`` is the distribution of the next state.
    """

    N: int
    C: int
    states: tuple
    index: dict
    transition: sparse.csr_matrix

    def __len__(self) -> int:
        return len(self.states)


def _check_size(N: int, C: int) -> int:
    if not 0 <= C <= N:
        raise ValueError(f"need 0 <= C <= N, got C={C}, N={N}")
    size = math.comb(N, C)
    if size > MAX_STATES:
        raise ValueError(f"state space has {size} states, above the limit of {MAX_STATES}")
    return size


def build_state_space(dist: PopularityDistribution, C: int) -> StateSpace:
    """Enumerate states and build the transition matrix row by row."""
    if not dist.is_finite:
        raise ValueError("the oracle needs a finite catalog")
    N = dist.support_size
    _check_size(N, C)
    q = dist.probs()
    states = tuple(itertools.combinations(range(1, N + 1), C))
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for i, s in enumerate(states):
        members = set(s)
        stay = math.fsum(q[r - 1] for r in s)
        if C == 0:
            # an empty cache never stores anything
            stay = 1.0
        else:
            for r in range(1, N + 1):
                if r in members:
                    continue
                for e in s:
                    t = tuple(sorted((members - {e}) | {r}))
                    rows.append(i)
                    cols.append(index[t])
                    vals.append(q[r - 1] / C)
        rows.append(i)
        cols.append(i)
        vals.append(stay)
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    P.sum_duplicates()
    return StateSpace(N, C, states, index, P)


def stationary_bruteforce(dist: PopularityDistribution, C: int,
                          space: Optional[StateSpace] = None, tol: float = 1e-12,
                          max_iter: int = 1_000_000) -> dict:
    """Stationary law of the cache chain as ``{state: probability}``.

    Solves ``pi P = pi`` with a dense linear solve below 2000 states and by
    power iteration above.
    """
    if space is None:
        space = build_state_space(dist, C)
    n = len(space)
    P = space.transition
    if n == 1:
        pi = np.ones(1)
    elif n <= DENSE_LIMIT:
        A = P.T.toarray() - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
    else:
        pi = np.full(n, 1.0 / n)
        PT = P.T.tocsr()
        for _ in range(max_iter):
            nxt = PT @ pi
            nxt /= nxt.sum()
            if np.abs(nxt - pi).sum() < tol:
                pi = nxt
                break
            pi = nxt
        else:
            raise PrecisionError(f"power iteration did not reach {tol} in {max_iter} steps", C=C)
    resid = np.abs(P.T @ pi - pi).max()
    if resid > 1e3 * tol:
        raise PrecisionError(f"stationary residual {resid:.3g} too large", C=C)
    return dict(zip(space.states, pi))


def product_form(dist: PopularityDistribution, C: int) -> dict:
    """``prod_{j in s} q_j`` normalized over all ``C``-subsets (by enumeration)."""
    N = dist.support_size
    _check_size(N, C)
    q = dist.probs()
    states = list(itertools.combinations(range(1, N + 1), C))
    w = np.array([math.prod(q[j - 1] for j in s) for s in states], dtype=float)
    w /= math.fsum(w)
    return dict(zip(states, w))


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def miss_rate_subsets(dist: PopularityDistribution, C: int) -> float:
    """Miss probability as a ratio of subset sums.

    ``sum_s prod_{j in s} q_j * sum_{r not in s} q_r`` over
    ``sum_s prod_{j in s} q_j``, with ``s`` ranging over ``C``-subsets.
    """
    if not dist.is_finite:
        raise ValueError("the oracle needs a finite catalog")
    N = dist.support_size
    _check_size(N, C)
    q = dist.probs()
    num, den = [], []
    for s in itertools.combinations(range(N), C):
        w = math.prod(q[j] for j in s)
        members = set(s)
        outside = math.fsum(q[r] for r in range(N) if r not in members)
        num.append(w * outside)
        den.append(w)
    return math.fsum(num) / math.fsum(den)


def miss_rate_stationary(dist: PopularityDistribution, C: int,
                         space: Optional[StateSpace] = None) -> float:
    """Miss probability from the brute-force stationary law."""
    pi = stationary_bruteforce(dist, C, space)
    q = dist.probs()
    total = math.fsum(q)
    return math.fsum(p * (total - math.fsum(q[j - 1] for j in s)) for s, p in pi.items())


def reversibility_check(dist: PopularityDistribution, C: int, space: Optional[StateSpace] = None,
                        tol: float = 1e-12) -> tuple[bool, float]:
    """Largest ``|pi(s) P(s,t) - pi(t) P(t,s)|`` over state pairs, and whether it is below ``tol``.

    ``pi`` is the brute-force stationary law of ``space`` (built from
    ``dist`` if not given), so a corrupted transition matrix shows up as a
    violation.
    """
    if space is None:
        space = build_state_space(dist, C)
    pi_map = stationary_bruteforce(dist, C, space)
    pi = np.array([pi_map[s] for s in space.states])
    P = space.transition.tocoo()
    flow = sparse.csr_matrix((pi[P.row] * P.data, (P.row, P.col)), shape=P.shape)
    diff = flow - flow.T
    worst = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return worst < tol, worst
