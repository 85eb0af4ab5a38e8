"""Initial node embeddings from influence-context walks.

Each node u gets a context C_u made of a local part (random walk with
restart over out-edges, collecting distinct visited nodes) and a global
part (uniform sample from the r-hop out-neighborhood). A skip-gram style
objective with negative sampling is then ascended with closed-form
gradient updates, producing the per-node triple (X: scalar, S, T:
l-vectors) consumed by the coupled network as frozen input features.

The score of a (u, v) pair is z_v = X_u * (S_u . T_v) + X_v and the pair
term being maximized is log sigmoid(z_v) + sum_w log sigmoid(-z_w) over
negative samples w.
"""

from dataclasses import dataclass

import numpy as np

from .graph import r_hop_out_neighbors
from .numerics import ParamStore


@dataclass(frozen=True)
class WalkConfig:
    dim: int = 64            # l, length of S and T
    context_size: int = 10   # L, cap on |C_u|
    local_fraction: float = 0.7   # share of the context budget walked locally
    hops: int = 2            # radius of the global sample
    negatives: int = 5       # negative samples per positive pair
    lr: float = 0.01
    restart: float = 0.15
    epochs: int = 3

    def __post_init__(self):
        if not (0.0 <= self.local_fraction <= 1.0):
            raise ValueError("local_fraction must lie in [0,1]")
        if self.context_size < 1 or self.hops < 1 or self.negatives < 1:
            raise ValueError("context_size, hops, negatives must be >= 1")

    @property
    def local_budget(self):
        return int(round(self.local_fraction * self.context_size))

    @property
    def global_budget(self):
        return self.context_size - self.local_budget


# sigma^2 = 0.01 for the Gaussian init, i.e. std 0.1
INIT_STD = 0.1
SURROGATE_SEED = 9001


@dataclass
class InitEmbedding:
    """Frozen input features per node: x scalar, s and t vectors."""

    x: np.ndarray  # (n,)
    s: np.ndarray  # (n, l)
    t: np.ndarray  # (n, l)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.s.shape[1]

    @classmethod
    def gaussian(cls, n, dim, rng):
        return cls(
            x=rng.normal(0.0, INIT_STD, size=n),
            s=rng.normal(0.0, INIT_STD, size=(n, dim)),
            t=rng.normal(0.0, INIT_STD, size=(n, dim)),
        )

    @classmethod
    def surrogate(cls, n, dim, seed=SURROGATE_SEED):
        """Fixed stand-in used when walk embeddings are skipped at test
        time: zero activation, Gaussian S/T from a fixed seed."""
        rng = np.random.default_rng(seed)
        emb = cls.gaussian(n, dim, rng)
        emb.x[...] = 0.0
        return emb

    def copy(self):
        return InitEmbedding(self.x.copy(), self.s.copy(), self.t.copy())

    def save(self, path, meta=None):
        store = ParamStore()
        store.add("pdw/X", self.x)
        store.add("pdw/S", self.s)
        store.add("pdw/T", self.t)
        store.save(path, meta=meta)

    @classmethod
    def load(cls, path):
        store, _ = ParamStore.load(path)
        return cls(store["pdw/X"].copy(), store["pdw/S"].copy(), store["pdw/T"].copy())


def local_context(g, u, budget, restart, rng, step_cap=None) -> set:
    """Distinct nodes visited by a restart walk from u over out-edges.

    Collection stops at `budget` distinct nodes or at the step cap
    (100x the context-size threshold in the training pipeline), whichever
    comes first; a node with no out-edges yields nothing.
    """
    if budget <= 0:
        return set()
    found = set()
    cap = step_cap if step_cap is not None else 100 * max(budget, 1)
    current = u
    for _ in range(cap):
        ids, _ = g.out_neighbors(current)
        if ids.size == 0 or rng.random() < restart:
            current = u
            continue
        current = int(ids[rng.integers(ids.size)])
        if current != u:
            found.add(current)
            if len(found) >= budget:
                break
    return found


def global_context(g, u, budget, hops, rng) -> set:
    """Uniform sample without replacement from the r-hop out-neighborhood."""
    if budget <= 0:
        return set()
    reachable = sorted(r_hop_out_neighbors(g, u, hops))
    if len(reachable) <= budget:
        return set(reachable)
    picks = rng.choice(len(reachable), size=budget, replace=False)
    return {reachable[i] for i in picks}


def build_contexts(g, cfg, rng):
    """[(u, context tuple)] for every node; |context| <= context_size."""
    out = []
    cap = 100 * cfg.context_size
    for u in range(g.n):
        local = local_context(g, u, cfg.local_budget, cfg.restart, rng, step_cap=cap)
        glob = global_context(g, u, cfg.global_budget, cfg.hops, rng)
        out.append((u, tuple(sorted(local | glob))))
    return out


def _score(emb, u, v):
    return emb.x[u] * float(emb.s[u] @ emb.t[v]) + emb.x[v]


def _sigm(z):
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def pair_objective(emb, u, v, negs) -> float:
    """log sigmoid(z_v) + sum_w log sigmoid(-z_w) for one positive pair."""
    val = float(np.log(_sigm(_score(emb, u, v))))
    for w in negs:
        val += float(np.log(_sigm(-_score(emb, u, w))))
    return val


def pair_gradients(emb, u, v, negs):
    """Closed-form ascent gradients of the pair term at the current point.

    Returns {"x_u", "s_u", "t_v", "x_v", ("t_w", w), ("x_w", w)...}; the
    x_u and s_u entries already include the negative-sample terms.
    """
    coef_v = 1.0 - _sigm(_score(emb, u, v))
    grads = {
        "s_u": coef_v * emb.x[u] * emb.t[v],
        "t_v": coef_v * emb.x[u] * emb.s[u],
        "x_u": coef_v * float(emb.s[u] @ emb.t[v]),
        "x_v": coef_v,
    }
    for w in negs:
        coef_w = -_sigm(_score(emb, u, w))
        grads["s_u"] = grads["s_u"] + coef_w * emb.x[u] * emb.t[w]
        grads["x_u"] = grads["x_u"] + coef_w * float(emb.s[u] @ emb.t[w])
        grads[("t_w", w)] = coef_w * emb.x[u] * emb.s[u]
        grads[("x_w", w)] = coef_w
    return grads


def _positive_step(emb, u, v, lr):
    coef = 1.0 - _sigm(_score(emb, u, v))
    dx_u = coef * float(emb.s[u] @ emb.t[v])
    ds_u = coef * emb.x[u] * emb.t[v]
    dt_v = coef * emb.x[u] * emb.s[u]
    emb.x[u] += lr * dx_u
    emb.s[u] += lr * ds_u
    emb.t[v] += lr * dt_v
    emb.x[v] += lr * coef


def _negative_step(emb, u, w, lr):
    coef = -_sigm(_score(emb, u, w))
    dx_u = coef * float(emb.s[u] @ emb.t[w])
    ds_u = coef * emb.x[u] * emb.t[w]
    dt_w = coef * emb.x[u] * emb.s[u]
    emb.x[u] += lr * dx_u
    emb.s[u] += lr * ds_u
    emb.t[w] += lr * dt_w
    emb.x[w] += lr * coef


def corpus_objective(emb, contexts, eval_negs) -> float:
    """Negative-sampling objective over all pairs with fixed negatives."""
    val = 0.0
    for u, ctx in contexts:
        for v in ctx:
            val += pair_objective(emb, u, v, eval_negs[(u, v)])
    return val


def train_embeddings(g, cfg, rng, track_objective=False):
    """Learn (X, S, T) for every node of g.

    Contexts are generated once; `epochs` ascent sweeps follow, visiting
    pairs in node order and resampling negatives per visit. With
    track_objective=True also returns the per-epoch objective measured on
    a fixed held-out negative sample (entry 0 is the pre-training value).
    """
    if g.n == 0:
        raise ValueError("graph has no nodes")
    emb = InitEmbedding.gaussian(g.n, cfg.dim, rng)
    contexts = build_contexts(g, cfg, rng)

    all_nodes = np.arange(g.n)
    excluded = {}
    for u, ctx in contexts:
        banned = set(ctx) | {u}
        pool = np.array([w for w in all_nodes if w not in banned], dtype=np.int64)
        excluded[u] = pool

    def draw_negs(u):
        pool = excluded[u]
        if pool.size == 0:
            return ()
        k = min(cfg.negatives, pool.size)
        return tuple(pool[rng.choice(pool.size, size=k, replace=False)].tolist())

    trace = None
    eval_negs = None
    if track_objective:
        eval_negs = {
            (u, v): draw_negs(u) for u, ctx in contexts for v in ctx
        }
        trace = [corpus_objective(emb, contexts, eval_negs)]

    for _ in range(cfg.epochs):
        for u, ctx in contexts:
            for v in ctx:
                _positive_step(emb, u, v, cfg.lr)
                for w in draw_negs(u):
                    _negative_step(emb, u, w, cfg.lr)
        if track_objective:
            trace.append(corpus_objective(emb, contexts, eval_negs))

    if track_objective:
        return emb, trace
    return emb
