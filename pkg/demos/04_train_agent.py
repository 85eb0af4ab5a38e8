#!/usr/bin/env python3
"""A small end-to-end training run of the seed-selection agent.

Trains on a handful of tiny random graphs (reduced width and episode
count so this finishes in about a minute), then compares the two
inference modes and a couple of baselines on a fresh graph.
"""

import numpy as np

from seedq import EdgeWeightScheme
from seedq.agent import DdqnConfig, infer_iterative, infer_one_time, train
from seedq.baselines import max_degree, random_seeds
from seedq.embedding import WalkConfig, train_embeddings
from seedq.gnn import GnnConfig
from seedq.harness import evaluate_spread, generate_training_suite
from seedq.rngs import stream

SEED = 17
scheme = EdgeWeightScheme.in_degree()
train_graphs = generate_training_suite(4, 12, 20, 0.2, scheme, SEED)
held_out = generate_training_suite(1, 16, 16, 0.2, scheme, SEED + 1)[0]

walk_cfg = WalkConfig(dim=16, epochs=2)
inits = [
    train_embeddings(g, walk_cfg, stream(SEED, "walks", i)) for i, g in enumerate(train_graphs)
]
print(f"training inputs: {[g.n for g in train_graphs]} nodes each")

cfg = DdqnConfig(
    episodes=150,
    budget=3,
    n_step=2,
    batch=16,
    pool_factor=64,
    gnn=GnnConfig(dim=16, layers=2),
)
result = train(train_graphs, inits, cfg, seed=SEED)
losses = [entry.loss for entry in result.log]
returns = [entry.ret for entry in result.log]
print(f"loss: first 10% {np.mean(losses[:15]):.3f} -> last 10% {np.mean(losses[-15:]):.3f}")
print(f"episode return: {np.mean(returns[:15]):.2f} -> {np.mean(returns[-15:]):.2f}")

print("\n=== inference on a held-out graph ===")
emb = train_embeddings(held_out, walk_cfg, stream(SEED, "walks-test"))
one = infer_one_time(held_out, emb, result.store, cfg, 3)
it = infer_iterative(held_out, emb, result.store, cfg, 3)
print("one-time pick :", list(one))
print("iterative pick:", list(it))

contenders = {
    "one-time": one,
    "iterative": it,
    "max-degree": max_degree(held_out, 3),
    "random": random_seeds(held_out, 3, stream(SEED, "rand")),
}
for name, seeds in contenders.items():
    est = evaluate_spread(held_out, seeds, 5000, SEED, scope=("demo", name))
    print(f"{name:>11}: spread {est.mean:6.2f} +- {est.stderr:.2f}")
