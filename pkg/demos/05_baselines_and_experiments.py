#!/usr/bin/env python3
"""Classical baselines and the experiment grid with CSV output.

Runs lazy greedy against its naive twin (they must match exactly on a
deterministic estimator), then drives the full measurement chain:
select -> time -> evaluate with an independent Monte-Carlo pass.
"""

import tempfile
from pathlib import Path

from seedq import EdgeWeightScheme, ExactEstimator, PoolEstimator, RRPool, generate_er
from seedq.baselines import celf_greedy, naive_greedy, ris_greedy
from seedq.graph import Graph, write_graph
from seedq.harness import ExperimentConfig, aggregate_rows, run_experiment, write_results
from seedq.rngs import stream

print("=== lazy greedy equals naive greedy on a fixed pool ===")
g_small = generate_er(10, 0.35, stream(0, "g"))
g_small = Graph(g_small.n, g_small.src, g_small.dst, stream(1, "w").uniform(0.1, 0.8, g_small.n_edges))
pool = RRPool.sample(g_small, 2000, stream(2, "pool"))
lazy = celf_greedy(g_small, 4, PoolEstimator(pool))
plain = naive_greedy(g_small, 4, PoolEstimator(pool))
print("lazy :", list(lazy.seeds), [f"{x:.2f}" for x in lazy.gains])
print("naive:", list(plain.seeds), [f"{x:.2f}" for x in plain.gains])
assert lazy.seeds.members == plain.seeds.members

if g_small.n_edges <= 22:
    exact = celf_greedy(g_small, 4, ExactEstimator(g_small))
    print("with the exact oracle:", list(exact.seeds))

print("\n=== rr-pool greedy on a larger graph ===")
g = generate_er(40, 0.15, stream(3, "g")).with_weights(EdgeWeightScheme.in_degree())
res = ris_greedy(g, 5, 256 * g.n, stream(4, "rr"))
print("seeds:", list(res.seeds))
print("pool-estimated marginals:", [f"{x:.2f}" for x in res.gains])

print("\n=== the experiment grid ===")
with tempfile.TemporaryDirectory() as tmp:
    graph_path = Path(tmp) / "demo.txt"
    write_graph(g, graph_path)
    cfg = ExperimentConfig(
        dataset=str(graph_path),
        scheme="from-file",
        budgets=(2, 5),
        methods=("random", "max-degree", "ris"),
        seed=9,
        eval_sims=4000,
        repetitions=2,
    )
    rows = run_experiment(cfg, g=g, dataset_name="demo")
    write_results(rows, Path(tmp) / "results.csv")
    print(f"{'method':>11} {'budget':>6} {'spread':>8} {'select_ms':>10}")
    for agg in aggregate_rows(rows):
        print(
            f"{agg['method']:>11} {agg['budget']:>6} "
            f"{agg['spread_mean']:>8.2f} {agg['select_ms']:>10.2f}"
        )
    print("\nCSV head:")
    print("\n".join((Path(tmp) / "results.csv").read_text().splitlines()[:4]))
