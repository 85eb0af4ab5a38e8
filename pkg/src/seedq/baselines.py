"""Classical seed-selection baselines: random, degree, greedy variants.

celf_greedy is lazy greedy over any spread estimator exposing .mean();
with a deterministic estimator (fixed RR pool, exact oracle) it returns
exactly the naive greedy sequence. ris_greedy samples its own RR pool and
runs plain max-coverage over it.
"""

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .diffusion import RRPool, SeedSet, as_seed_set


@dataclass
class BaselineResult:
    method: str
    seeds: SeedSet
    gains: list        # per-seed marginal estimate, in pick order
    wall_time: float   # seconds spent selecting


def random_seeds(g, b, rng) -> SeedSet:
    """Uniform b-subset of the nodes."""
    if b > g.n:
        raise ValueError("budget exceeds node count")
    picks = rng.choice(g.n, size=b, replace=False)
    return SeedSet(picks.tolist(), g.n)


def max_degree(g, b) -> SeedSet:
    """Top-b nodes by out-degree, ties to the smaller id."""
    if b > g.n:
        raise ValueError("budget exceeds node count")
    order = np.lexsort((np.arange(g.n), -g.out_degrees()))
    return SeedSet(order[:b].tolist(), g.n)


def naive_greedy(g, b, estimator) -> BaselineResult:
    """Plain greedy with full re-evaluation each round (test oracle for CELF)."""
    t0 = time.perf_counter()
    seeds = SeedSet((), g.n)
    gains = []
    current = 0.0
    for _ in range(min(b, g.n)):
        best_u, best_gain = -1, -np.inf
        for u in range(g.n):
            if u in seeds:
                continue
            gain = estimator.mean(seeds.with_node(u)) - current
            if gain > best_gain:
                best_u, best_gain = u, gain
        seeds = seeds.with_node(best_u)
        gains.append(best_gain)
        current += best_gain
    return BaselineResult("naive-greedy", seeds, gains, time.perf_counter() - t0)


def celf_greedy(g, b, estimator, rng=None) -> BaselineResult:
    """Greedy with lazy re-evaluation of stale marginal gains.

    Heap entries are (-gain, node, round-stamp); a popped entry whose
    stamp is current is final because submodular gains only shrink.
    Equal gains resolve to the smaller node id.
    """
    t0 = time.perf_counter()
    seeds = SeedSet((), g.n)
    current = 0.0
    heap = [(-estimator.mean(SeedSet((u,), g.n)), u, 0) for u in range(g.n)]
    heapq.heapify(heap)
    gains = []
    while len(seeds) < min(b, g.n):
        neg_gain, u, stamp = heapq.heappop(heap)
        if stamp == len(seeds):
            seeds = seeds.with_node(u)
            gains.append(-neg_gain)
            current += -neg_gain
            continue
        fresh = estimator.mean(seeds.with_node(u)) - current
        heapq.heappush(heap, (-fresh, u, len(seeds)))
    return BaselineResult("celf", seeds, gains, time.perf_counter() - t0)


def ris_greedy(g, b, pool_size, rng) -> BaselineResult:
    """Max-coverage greedy over a freshly sampled RR pool.

    The reported per-seed gain is the pool estimate n * covered/|pool|.
    """
    if pool_size < 1:
        raise ValueError("pool size must be >= 1")
    t0 = time.perf_counter()
    pool = RRPool.sample(g, pool_size, rng)
    remaining = np.array([len(pool.index[u]) for u in range(g.n)], dtype=np.int64)
    chosen = []
    gains = []
    covered = np.zeros(len(pool), dtype=bool)
    members = [set(s.tolist()) for s in pool.sets]
    for _ in range(min(b, g.n)):
        u = int(np.argmax(remaining))  # ties: smallest id
        chosen.append(u)
        gains.append(g.n * remaining[u] / len(pool))
        remaining[u] = -1
        for sid in pool.index[u]:
            if not covered[sid]:
                covered[sid] = True
                for w in members[sid]:
                    if remaining[w] >= 0:
                        remaining[w] -= 1
    seeds = SeedSet(chosen, g.n)
    return BaselineResult("ris-greedy", seeds, gains, time.perf_counter() - t0)


def pool_coverage(pool, seeds) -> float:
    """Fractional coverage of an RR pool by a seed set (max-coverage value)."""
    return pool.coverage_count(as_seed_set(seeds, pool.n)) / len(pool)
