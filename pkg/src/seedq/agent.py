"""Seed-selection agent: n-step Q-learning with a target network.

An episode picks `budget` seeds on one training graph. Rewards are
marginal spread estimates on an RR pool fixed for the episode, so the
episode return telescopes to the pool estimate of the final seed set.
After each episode one Adam step is taken on the mean squared error
between stored n-step returns (bootstrapped through the target network)
and the behavior network's values; the target network is re-synced every
`sync_every` episodes.
"""

import csv
import time
from collections import deque
from dataclasses import dataclass, field, asdict

import numpy as np

from . import gnn
from . import numerics as nd
from .gnn import GnnConfig
from .diffusion import RRPool, as_seed_set, SeedSet
from .embedding import InitEmbedding, WalkConfig, train_embeddings
from .rngs import stream


@dataclass(frozen=True)
class Transition:
    """Replay record: the state n steps back, the action taken there, the
    discounted n-step reward, and the state reached now."""

    state: tuple
    action: int
    reward_n: float
    next_state: tuple
    terminal: bool
    graph_id: int

    def __post_init__(self):
        if self.action in self.state:
            raise ValueError("action already in state")
        if not set(self.state) < set(self.next_state):
            raise ValueError("state must be a strict subset of next_state")


class ReplayBuffer:
    """FIFO ring of transitions with uniform batch sampling."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._ring = deque(maxlen=capacity)

    def push(self, transition):
        self._ring.append(transition)

    def sample(self, batch, rng):
        k = min(batch, len(self._ring))
        idx = rng.choice(len(self._ring), size=k, replace=False)
        return [self._ring[i] for i in idx]

    def __len__(self):
        return len(self._ring)

    def __iter__(self):
        return iter(self._ring)


@dataclass(frozen=True)
class DdqnConfig:
    episodes: int = 1000
    budget: int = 5
    n_step: int = 2
    gamma: float = 0.5
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float | None = None  # default: reach 0.1 at 80% of episodes
    batch: int = 64
    sync_every: int = 10
    capacity: int = 4096
    lr: float = 1e-3
    pool_factor: int = 256          # RR sets per node in the episode pool
    fixed_pool_seed: int | None = None  # reuse one pool every episode
    decoupled_argmax: bool = False  # argmax under behavior, value under target
    gnn: GnnConfig = field(default_factory=GnnConfig)

    def __post_init__(self):
        if not (1 <= self.n_step <= self.budget):
            raise ValueError("need 1 <= n_step <= budget")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0,1]")

    def epsilon(self, episode):
        """Exponential decay from eps_start, floored at eps_end."""
        decay = self.eps_decay
        if decay is None:
            horizon = max(1.0, 0.8 * self.episodes)
            decay = (0.1 / self.eps_start) ** (1.0 / horizon)
        return max(self.eps_end, self.eps_start * decay**episode)


@dataclass
class EpisodeLog:
    episode: int
    graph_id: int
    ret: float
    loss: float
    eps: float
    wall_ms: float
    seeds: tuple = ()  # final seed set; kept out of the CSV schema


LOG_COLUMNS = ("episode", "graph_id", "return", "loss", "eps", "wall_ms")


def write_training_log(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for r in rows:
            writer.writerow([r.episode, r.graph_id, r.ret, r.loss, r.eps, r.wall_ms])


def _q_all(g, emb, seeds, store, cfg):
    with nd.no_grad():
        state = gnn.forward(g, emb, seeds, store, cfg.gnn)
        return gnn.q_values(g, state, seeds, store).value


def _masked_argmax(q, seeds, n):
    masked = q.copy()
    if seeds:
        masked[list(seeds)] = -np.inf
    return int(np.argmax(masked))  # first max, i.e. smallest node id on ties


def select_action(g, emb, seeds, store, cfg, eps, rng) -> int:
    """Epsilon-greedy pick over non-seeds; greedy ties go to the smallest id.

    The embedding/value computation is skipped entirely on the exploring
    branch.
    """
    seeds = as_seed_set(seeds, g.n)
    remaining = g.n - len(seeds)
    if remaining <= 0:
        raise ValueError("no remaining action")
    if rng.random() < eps:
        candidates = np.setdiff1d(np.arange(g.n), np.asarray(seeds.members, dtype=np.int64))
        return int(candidates[rng.integers(candidates.size)])
    return _masked_argmax(_q_all(g, emb, seeds, store, cfg), seeds.members, g.n)


def td_targets(batch, graphs, inits, target_store, cfg, behavior_store=None):
    """Bootstrapped targets: reward_n + gamma^n max_v Q(v, next; target).

    Terminal transitions take the stored return as-is. With
    cfg.decoupled_argmax the maximizing action comes from the behavior
    network and only its value from the target network.
    """
    ys = np.empty(len(batch))
    memo = {}
    for i, tr in enumerate(batch):
        if tr.terminal:
            ys[i] = tr.reward_n
            continue
        key = (tr.graph_id, tr.next_state)
        if key not in memo:
            g = graphs[tr.graph_id]
            emb = inits[tr.graph_id]
            q_t = _q_all(g, emb, tr.next_state, target_store, cfg)
            if cfg.decoupled_argmax:
                if behavior_store is None:
                    raise ValueError("decoupled argmax needs the behavior store")
                q_b = _q_all(g, emb, tr.next_state, behavior_store, cfg)
                best = _masked_argmax(q_b, tr.next_state, g.n)
            else:
                best = _masked_argmax(q_t, tr.next_state, g.n)
            memo[key] = float(q_t[best])
        ys[i] = tr.reward_n + cfg.gamma**cfg.n_step * memo[key]
    return ys


def _episode_transitions(states, actions, rewards, cfg, graph_id, budget):
    """All n-step records of a finished episode, truncated tail included.

    For start index j, the record spans min(n, budget-j) realized steps;
    records ending at the final state are terminal.
    """
    n = cfg.n_step
    out = []
    for j in range(budget):
        span = min(n, budget - j)
        reward = sum(cfg.gamma**i * rewards[j + i] for i in range(span))
        terminal = j + span == budget
        out.append(
            Transition(
                state=states[j],
                action=actions[j],
                reward_n=reward,
                next_state=states[j + span],
                terminal=terminal,
                graph_id=graph_id,
            )
        )
    return out


@dataclass
class TrainResult:
    store: nd.ParamStore
    log: list
    config: DdqnConfig
    seed: int

    def save(self, path):
        meta = {"config": _config_dict(self.config), "seed": self.seed}
        self.store.save(path, meta=meta)


def _config_dict(cfg):
    d = asdict(cfg)
    d["gnn"] = asdict(cfg.gnn)
    return d


def train(graphs, inits, cfg: DdqnConfig, seed, inspect=None) -> TrainResult:
    """Run the full training loop; deterministic given (inputs, seed).

    graphs/inits are parallel lists (weighted graphs and their frozen
    input embeddings). `inspect(episode, store, target_store)` is called
    after every episode when provided.
    """
    if not graphs:
        raise ValueError("empty training set")
    if len(graphs) != len(inits):
        raise ValueError("graphs and inits must be parallel")
    store = gnn.init_params(cfg.gnn, stream(seed, "params"))
    target = store.copy()
    adam = nd.AdamState.for_store(store, lr=cfg.lr)
    buffer = ReplayBuffer(cfg.capacity)
    pick_rng = stream(seed, "graph-pick")
    log = []

    for episode in range(cfg.episodes):
        t0 = time.perf_counter()
        eps = cfg.epsilon(episode)
        gid = int(pick_rng.integers(len(graphs)))
        g, emb = graphs[gid], inits[gid]

        pool_key = cfg.fixed_pool_seed if cfg.fixed_pool_seed is not None else episode
        pool = RRPool.sample(g, cfg.pool_factor * g.n, stream(seed, "reward-pool", pool_key))
        tracker = pool.tracker()
        explore_rng = stream(seed, "explore", episode)

        seeds = []
        states = [()]
        actions, rewards = [], []
        for _ in range(cfg.budget):
            u = select_action(g, emb, seeds, store, cfg, eps, explore_rng)
            rewards.append(tracker.gain(u))
            tracker.commit(u)
            actions.append(u)
            seeds.append(u)
            states.append(tuple(seeds))
        for tr in _episode_transitions(states, actions, rewards, cfg, gid, cfg.budget):
            buffer.push(tr)

        batch = buffer.sample(cfg.batch, stream(seed, "replay", episode))
        ys = td_targets(batch, graphs, inits, target, cfg, behavior_store=store)
        store.zero_grads()
        loss_total = 0.0
        for tr, y in zip(batch, ys):
            state = gnn.forward(graphs[tr.graph_id], inits[tr.graph_id], tr.state, store, cfg.gnn)
            q = gnn.q_value(tr.action, tr.state, state, store)
            diff = nd.sub(nd.constant(np.float64(y)), q)
            sq = nd.mul(diff, diff)
            nd.backward(sq, store)
            loss_total += float(sq.value)
        store.scale_grads(1.0 / len(batch))
        nd.adam_step(store, adam)

        if (episode + 1) % cfg.sync_every == 0:
            target = store.copy()
        if inspect is not None:
            inspect(episode, store, target)
        log.append(
            EpisodeLog(
                episode=episode,
                graph_id=gid,
                ret=float(sum(rewards)),
                loss=loss_total / len(batch),
                eps=eps,
                wall_ms=(time.perf_counter() - t0) * 1e3,
                seeds=tuple(seeds),
            )
        )
    return TrainResult(store=store, log=log, config=cfg, seed=seed)


def infer_one_time(g, emb, store, cfg, b) -> SeedSet:
    """Single value computation from the empty state; top-b nodes win,
    ties to the smaller node id."""
    if b > g.n:
        raise ValueError("budget exceeds node count")
    q = _q_all(g, emb, (), store, cfg)
    order = np.lexsort((np.arange(g.n), -q))
    return SeedSet(order[:b].tolist(), g.n)


def infer_iterative(g, emb, store, cfg, b) -> SeedSet:
    """b rounds of recompute-and-argmax, inserting one seed per round."""
    if b > g.n:
        raise ValueError("budget exceeds node count")
    seeds = []
    for _ in range(b):
        q = _q_all(g, emb, seeds, store, cfg)
        seeds.append(_masked_argmax(q, seeds, g.n))
    return SeedSet(seeds, g.n)


# --- embedding-source ablation modes ---


@dataclass(frozen=True)
class EmbeddingSelector:
    """Which initial-embedding source is used when training and testing."""

    name: str
    train_walks: bool
    test_walks: bool

    def _make(self, use_walks, g, walk_cfg, rng):
        if use_walks:
            return train_embeddings(g, walk_cfg, rng)
        return InitEmbedding.surrogate(g.n, walk_cfg.dim)

    def train_embedding(self, g, walk_cfg: WalkConfig, rng) -> InitEmbedding:
        return self._make(self.train_walks, g, walk_cfg, rng)

    def test_embedding(self, g, walk_cfg: WalkConfig, rng) -> InitEmbedding:
        return self._make(self.test_walks, g, walk_cfg, rng)


_MODES = {
    "tiei": EmbeddingSelector("tiei", True, True),
    "tien": EmbeddingSelector("tien", True, False),
    "tnen": EmbeddingSelector("tnen", False, False),
}


def ablation_mode(mode) -> EmbeddingSelector:
    """Resolve TIEI / TIEN / TNEN (case-insensitive).

    TIEI and TIEN train identically (walk embeddings) and may share one
    checkpoint; they differ only in the test-time embedding source.
    """
    try:
        return _MODES[mode.lower()]
    except KeyError:
        raise ValueError(f"unknown ablation mode {mode!r}") from None
