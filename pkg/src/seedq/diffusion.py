"""Independent-cascade spread: simulation, estimators, and the exact oracle.

Spread of a seed set is the expected number of nodes active when the
cascade stops. Three estimators are provided: plain Monte Carlo over
forward cascades, a reverse-reachable-set (RR) pool estimator, and exact
enumeration of live-edge worlds for small graphs. The RR pool also powers
the training-phase reward, where a pool fixed for a whole episode makes
per-step marginal rewards telescope exactly to the final spread estimate.
"""

import struct
from dataclasses import dataclass

import numpy as np

_EXACT_EDGE_CAP = 22


class SeedSet:
    """Ordered, duplicate-free collection of node ids."""

    __slots__ = ("members", "_lookup")

    def __init__(self, members=(), n=None):
        members = tuple(int(u) for u in members)
        lookup = set(members)
        if len(lookup) != len(members):
            raise ValueError("duplicate seed")
        if members and min(members) < 0:
            raise ValueError("seed id must be non-negative")
        if n is not None and members and max(members) >= n:
            raise ValueError(f"seed id out of range for n={n}")
        self.members = members
        self._lookup = lookup

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, u):
        return u in self._lookup

    def __eq__(self, other):
        return isinstance(other, SeedSet) and self.members == other.members

    def __repr__(self):
        return f"SeedSet({list(self.members)})"

    def with_node(self, u):
        if u in self._lookup:
            raise ValueError(f"node {u} already a seed")
        return SeedSet(self.members + (int(u),))

    def indicator(self, n):
        """0/1 state vector of length n (1 at seed positions)."""
        vec = np.zeros(n, dtype=np.float64)
        vec[list(self.members)] = 1.0
        return vec


def as_seed_set(seeds, n=None) -> SeedSet:
    if isinstance(seeds, SeedSet):
        if n is not None and seeds.members and max(seeds.members) >= n:
            raise ValueError(f"seed id out of range for n={n}")
        return seeds
    return SeedSet(seeds, n)


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class RRSet:
    """One reverse-reachable sample: every node with a live path to root."""

    root: int
    members: frozenset


def simulate_ic(g, seeds, rng, stats=None) -> int:
    """One forward cascade; returns the number of active nodes at the end.

    Newly active nodes try each still-inactive out-neighbor once with the
    edge probability; every directed edge is attempted at most once. Pass a
    dict as `stats` to collect the attempt count under "edge_draws".
    """
    if g.p is None:
        raise ValueError("graph is unweighted; apply a weight scheme first")
    seeds = as_seed_set(seeds, g.n)
    active = np.zeros(g.n, dtype=bool)
    frontier = list(seeds.members)
    active[frontier] = True
    count = len(frontier)
    draws = 0
    while frontier:
        nxt = []
        for u in frontier:
            ids, ps = g.out_neighbors(u)
            if ids.size == 0:
                continue
            alive = ~active[ids]
            if not alive.any():
                continue
            cand = ids[alive]
            hit = rng.random(cand.size) < ps[alive]
            draws += cand.size
            for v in cand[hit].tolist():
                if not active[v]:
                    active[v] = True
                    nxt.append(v)
        count += len(nxt)
        frontier = nxt
    if stats is not None:
        stats["edge_draws"] = stats.get("edge_draws", 0) + draws
    return count


def estimate_spread_mc(g, seeds, n_sims, rng) -> SpreadEstimate:
    """Monte-Carlo spread estimate over n_sims independent cascades."""
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    seeds = as_seed_set(seeds, g.n)
    totals = np.empty(n_sims, dtype=np.float64)
    for i in range(n_sims):
        totals[i] = simulate_ic(g, seeds, rng)
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / np.sqrt(n_sims)) if n_sims > 1 else 0.0
    return SpreadEstimate(mean, stderr, n_sims)


def exact_spread(g, seeds) -> float:
    """Exact spread by enumerating every live-edge world (<= 22 edges).

    Each world keeps edge e alive independently with probability p_e; the
    spread equals the probability-weighted mean of the seed-reachable set
    size, which is the IC spread by the live-edge equivalence.
    """
    if g.p is None:
        raise ValueError("graph is unweighted; apply a weight scheme first")
    m = g.n_edges
    if m > _EXACT_EDGE_CAP:
        raise ValueError(f"exact oracle refuses {m} edges (cap {_EXACT_EDGE_CAP})")
    seeds = as_seed_set(seeds, g.n)
    if not seeds.members:
        return 0.0
    if m == 0:
        return float(len(seeds))

    src, dst, p = g.src, g.dst, g.p
    seed_idx = list(seeds.members)
    total = 0.0
    n_worlds = 1 << m
    chunk = min(n_worlds, 1 << 15)
    for start in range(0, n_worlds, chunk):
        masks = np.arange(start, min(start + chunk, n_worlds), dtype=np.uint64)
        live = ((masks[:, None] >> np.arange(m, dtype=np.uint64)) & 1).astype(bool)
        probs = np.where(live, p, 1.0 - p).prod(axis=1)
        active = np.zeros((masks.size, g.n), dtype=bool)
        active[:, seed_idx] = True
        changed = True
        while changed:
            changed = False
            for e in range(m):
                upd = active[:, src[e]] & live[:, e] & ~active[:, dst[e]]
                if upd.any():
                    active[upd, dst[e]] = True
                    changed = True
        total += float(probs @ active.sum(axis=1))
    return total


def _reverse_reach(g, root, rng):
    """Nodes with a live reverse path to root; each in-edge flipped once."""
    members = np.zeros(g.n, dtype=bool)
    members[root] = True
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            ids, ps = g.in_neighbors(v)
            if ids.size == 0:
                continue
            fresh = ~members[ids]
            if not fresh.any():
                continue
            cand = ids[fresh]
            hit = rng.random(cand.size) < ps[fresh]
            for u in cand[hit].tolist():
                if not members[u]:
                    members[u] = True
                    nxt.append(u)
        frontier = nxt
    return np.flatnonzero(members)


def sample_rr_set(g, rng) -> RRSet:
    """One RR set: uniform root, then probabilistic reverse traversal."""
    if g.n < 1:
        raise ValueError("graph has no nodes")
    if g.p is None:
        raise ValueError("graph is unweighted; apply a weight scheme first")
    root = int(rng.integers(g.n))
    members = _reverse_reach(g, root, rng)
    return RRSet(root, frozenset(members.tolist()))


class RRPool:
    """A fixed collection of RR sets with a node -> set-ids inverted index."""

    def __init__(self, n, member_arrays):
        self.n = int(n)
        self.sets = member_arrays
        index = [[] for _ in range(self.n)]
        for sid, members in enumerate(member_arrays):
            for u in members.tolist():
                index[u].append(sid)
        self.index = [np.asarray(ids, dtype=np.int64) for ids in index]

    @classmethod
    def sample(cls, g, size, rng):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        roots = rng.integers(g.n, size=size)
        return cls(g.n, [_reverse_reach(g, int(r), rng) for r in roots])

    def __len__(self):
        return len(self.sets)

    def coverage_count(self, seeds) -> int:
        seeds = as_seed_set(seeds, self.n)
        if not seeds.members:
            return 0
        hit = np.zeros(len(self.sets), dtype=bool)
        for u in seeds:
            hit[self.index[u]] = True
        return int(hit.sum())

    def estimate(self, seeds) -> SpreadEstimate:
        m = len(self.sets)
        if m == 0:
            raise ValueError("empty RR pool")
        frac = self.coverage_count(seeds) / m
        mean = self.n * frac
        stderr = self.n * float(np.sqrt(frac * (1.0 - frac) / (m - 1))) if m > 1 else 0.0
        return SpreadEstimate(mean, stderr, m)

    def tracker(self):
        return PoolCoverTracker(self)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(b"SQRRPOOL")
            fh.write(struct.pack("<IQQ", 1, self.n, len(self.sets)))
            sizes = np.array([s.size for s in self.sets], dtype=np.int64)
            fh.write(sizes.tobytes())
            for s in self.sets:
                fh.write(s.astype("<i8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            if fh.read(8) != b"SQRRPOOL":
                raise ValueError(f"{path} is not an RR pool cache")
            _, n, count = struct.unpack("<IQQ", fh.read(20))
            sizes = np.frombuffer(fh.read(8 * count), dtype="<i8")
            sets = [
                np.frombuffer(fh.read(8 * int(k)), dtype="<i8").astype(np.int64) for k in sizes
            ]
        return cls(n, sets)


def pool_cache_path(cache_dir, g, size, seed):
    """Deterministic cache location keyed by (graph hash, pool size, seed)."""
    return f"{cache_dir}/rr_{g.content_hash()[:16]}_{size}_{seed}.pool"


class PoolCoverTracker:
    """Incremental coverage as seeds are committed one by one."""

    def __init__(self, pool):
        self.pool = pool
        self.covered = np.zeros(len(pool.sets), dtype=bool)
        self.covered_count = 0

    def gain_count(self, u) -> int:
        ids = self.pool.index[u]
        if ids.size == 0:
            return 0
        return int(np.count_nonzero(~self.covered[ids]))

    def gain(self, u) -> float:
        """Marginal spread estimate of adding u on this pool."""
        return self.pool.n * self.gain_count(u) / len(self.pool.sets)

    def commit(self, u):
        ids = self.pool.index[u]
        if ids.size:
            self.covered_count += int(np.count_nonzero(~self.covered[ids]))
            self.covered[ids] = True

    def spread(self) -> float:
        return self.pool.n * self.covered_count / len(self.pool.sets)


def estimate_spread_ris(pool, n, seeds) -> SpreadEstimate:
    """Spread estimate from an RR collection: n * hit fraction.

    Accepts an RRPool or any iterable of RRSet / node collections.
    """
    if isinstance(pool, RRPool):
        if pool.n != n:
            raise ValueError("pool was sampled from a different node count")
        return pool.estimate(seeds)
    sets = [s.members if isinstance(s, RRSet) else frozenset(s) for s in pool]
    if not sets:
        raise ValueError("empty RR collection")
    seeds = as_seed_set(seeds, n)
    lookup = seeds._lookup
    hits = sum(1 for s in sets if not lookup.isdisjoint(s))
    m = len(sets)
    frac = hits / m
    stderr = n * float(np.sqrt(frac * (1.0 - frac) / (m - 1))) if m > 1 else 0.0
    return SpreadEstimate(n * frac, stderr, m)


# --- estimator facades shared by greedy baselines, rewards, and evaluation ---


class MonteCarloEstimator:
    """sigma(S) by fresh forward simulations per query."""

    def __init__(self, g, n_sims, rng):
        self.g = g
        self.n_sims = n_sims
        self.rng = rng

    def estimate(self, seeds) -> SpreadEstimate:
        return estimate_spread_mc(self.g, seeds, self.n_sims, self.rng)

    def mean(self, seeds) -> float:
        return self.estimate(seeds).mean


class PoolEstimator:
    """sigma(S) on a fixed RR pool; deterministic given the pool."""

    def __init__(self, pool):
        self.pool = pool
        self.g = None

    @classmethod
    def sampled(cls, g, size, rng):
        return cls(RRPool.sample(g, size, rng))

    def estimate(self, seeds) -> SpreadEstimate:
        return self.pool.estimate(seeds)

    def mean(self, seeds) -> float:
        m = len(self.pool.sets)
        return self.pool.n * self.pool.coverage_count(seeds) / m


class ExactEstimator:
    """sigma(S) by the live-edge oracle; memoized per seed set."""

    def __init__(self, g):
        self.g = g
        self._memo = {}

    def estimate(self, seeds) -> SpreadEstimate:
        return SpreadEstimate(self.mean(seeds), 0.0, 0)

    def mean(self, seeds) -> float:
        key = frozenset(as_seed_set(seeds, self.g.n).members)
        if key not in self._memo:
            self._memo[key] = exact_spread(self.g, key)
        return self._memo[key]


def marginal_reward(estimator, seeds, u) -> float:
    """Change in estimated spread from adding u to the seed set.

    Both terms come from the same estimator configuration, so on a fixed
    RR pool the per-step rewards of an episode telescope exactly to the
    pool estimate of the final seed set.
    """
    seeds = as_seed_set(seeds)
    if u in seeds:
        raise ValueError(f"node {u} is already a seed")
    return estimator.mean(seeds.with_node(u)) - estimator.mean(seeds)
