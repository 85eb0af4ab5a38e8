"""Command-line front end.

Every subcommand accepts --config pointing at a sectioned key-value file;
explicit flags override file values, which override built-in defaults.
All randomness flows from --seed through named streams, so a command line
is reproducible from (config, seed).
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import agent, baselines, gnn, harness
from .diffusion import SeedSet
from .embedding import WalkConfig, train_embeddings
from .graph import EdgeWeightScheme, generate_er, read_graph, write_graph
from .numerics import no_grad
from .rngs import stream


def _config_section(args, name):
    if not getattr(args, "config", None):
        return {}
    return harness.read_config(args.config).get(name, {})


def _resolve(args, section, key, default, cast):
    """flag > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in section:
        return cast(section[key])
    return default


def _coerce_int(s):
    return int(s)


def _coerce_float(s):
    return float(s)


def _out_dir(args):
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graphs(paths):
    return [read_graph(p) for p in paths]


def cmd_gen_graphs(args):
    section = _config_section(args, "gen-graphs")
    count = _resolve(args, section, "count", 20, _coerce_int)
    n_min = _resolve(args, section, "n_min", 15, _coerce_int)
    n_max = _resolve(args, section, "n_max", 50, _coerce_int)
    p = _resolve(args, section, "p", 0.15, _coerce_float)
    scheme = EdgeWeightScheme.parse(_resolve(args, section, "scheme", "in-degree", str))
    out = _out_dir(args)
    graphs = harness.generate_training_suite(count, n_min, n_max, p, scheme, args.seed)
    for i, g in enumerate(graphs):
        write_graph(g, out / f"graph_{i:03d}.txt")
    print(f"wrote {count} graphs to {out}")
    return 0


def cmd_pdw(args):
    section = _config_section(args, "pdw")
    cfg = WalkConfig(
        dim=_resolve(args, section, "dim", 64, _coerce_int),
        context_size=_resolve(args, section, "context_size", 10, _coerce_int),
        local_fraction=_resolve(args, section, "local_fraction", 0.7, _coerce_float),
        hops=_resolve(args, section, "hops", 2, _coerce_int),
        negatives=_resolve(args, section, "negatives", 5, _coerce_int),
        lr=_resolve(args, section, "lr", 0.01, _coerce_float),
        restart=_resolve(args, section, "restart", 0.15, _coerce_float),
        epochs=_resolve(args, section, "epochs", 3, _coerce_int),
    )
    g = read_graph(args.graph)
    emb = train_embeddings(g, cfg, stream(args.seed, "pdw", args.graph))
    out = _out_dir(args)
    path = out / (Path(args.graph).stem + ".emb")
    emb.save(str(path), meta={"graph": args.graph, "seed": args.seed})
    print(f"wrote embeddings to {path}")
    return 0


def _ddqn_config(args, section):
    return agent.DdqnConfig(
        episodes=_resolve(args, section, "episodes", 1000, _coerce_int),
        budget=_resolve(args, section, "budget", 5, _coerce_int),
        n_step=_resolve(args, section, "n_step", 2, _coerce_int),
        gamma=_resolve(args, section, "gamma", 0.99, _coerce_float),
        batch=_resolve(args, section, "batch", 64, _coerce_int),
        sync_every=_resolve(args, section, "sync_every", 10, _coerce_int),
        capacity=_resolve(args, section, "capacity", 4096, _coerce_int),
        lr=_resolve(args, section, "lr", 1e-3, _coerce_float),
        pool_factor=_resolve(args, section, "pool_factor", 256, _coerce_int),
        gnn=gnn.GnnConfig(
            dim=_resolve(args, section, "dim", 64, _coerce_int),
            layers=_resolve(args, section, "layers", 3, _coerce_int),
        ),
    )


def cmd_train(args):
    section = _config_section(args, "train")
    cfg = _ddqn_config(args, section)
    paths = sorted(Path(args.graphs_dir).glob("*.txt"))
    if not paths:
        print(f"no graph files under {args.graphs_dir}", file=sys.stderr)
        return 2
    graphs = _load_graphs(paths)
    selector = agent.ablation_mode(_resolve(args, section, "ablation", "tiei", str))
    walk_cfg = WalkConfig(dim=cfg.gnn.dim)
    inits = [
        selector.train_embedding(g, walk_cfg, stream(args.seed, "pdw-train", i))
        for i, g in enumerate(graphs)
    ]
    result = agent.train(graphs, inits, cfg, args.seed)
    out = _out_dir(args)
    result.save(out / "model.ckpt")
    agent.write_training_log(result.log, out / "training_log.csv")
    print(f"trained {cfg.episodes} episodes on {len(graphs)} graphs -> {out}/model.ckpt")
    return 0


def cmd_select(args):
    section = _config_section(args, "select")
    mode = _resolve(args, section, "mode", "one-time", str)
    budget = _resolve(args, section, "b", 5, _coerce_int)
    ablation = _resolve(args, section, "ablation", "tiei", str)
    g = read_graph(args.graph)
    store, ddqn_cfg, _ = harness.load_checkpoint(args.checkpoint)
    selector = agent.ablation_mode(ablation)
    rng = stream(args.seed, "select", args.graph)
    t0 = time.perf_counter()
    emb = selector.test_embedding(g, WalkConfig(dim=ddqn_cfg.gnn.dim), rng)
    if mode == "one-time":
        seeds = agent.infer_one_time(g, emb, store, ddqn_cfg, budget)
    elif mode == "iterative":
        seeds = agent.infer_iterative(g, emb, store, ddqn_cfg, budget)
    else:
        print(f"unknown mode {mode!r}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    path = out / "seeds.txt"
    with open(path, "w") as fh:
        fh.write(f"# select_ms = {elapsed * 1e3:.3f}\n")
        for u in seeds:
            fh.write(f"{g.labels[u]}\n")
    print(f"selected {len(seeds)} seeds in {elapsed * 1e3:.1f} ms -> {path}")
    return 0


def _read_seeds(path, g):
    label_to_id = {int(label): i for i, label in enumerate(g.labels)}
    ids = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                ids.append(label_to_id[int(line)])
    return SeedSet(ids, g.n)


def cmd_evaluate(args):
    section = _config_section(args, "evaluate")
    sims = _resolve(args, section, "sims", 10000, _coerce_int)
    g = read_graph(args.graph)
    seeds = _read_seeds(args.seeds, g)
    est = harness.evaluate_spread(g, seeds, sims, args.seed, threads=args.threads or 1)
    out = _out_dir(args)
    path = out / "evaluation.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph", "n_seeds", "sims", "spread_mean", "spread_stderr"])
        writer.writerow([args.graph, len(seeds), sims, f"{est.mean:.6f}", f"{est.stderr:.6f}"])
    print(f"spread {est.mean:.3f} +- {est.stderr:.3f} ({sims} sims) -> {path}")
    return 0


def cmd_baseline(args):
    section = _config_section(args, "baseline")
    method = _resolve(args, section, "method", "celf-mc", str)
    budget = _resolve(args, section, "b", 5, _coerce_int)
    cfg = harness.ExperimentConfig(
        dataset=args.graph,
        budgets=(budget,),
        methods=(method,),
        seed=args.seed,
        eval_sims=_resolve(args, section, "sims", 10000, _coerce_int),
        celf_sims=_resolve(args, section, "celf_sims", 2000, _coerce_int),
        ris_pool_factor=_resolve(args, section, "pool_factor", 256, _coerce_int),
        threads=args.threads or 1,
    )
    g = read_graph(args.graph)
    rows = harness.run_experiment(cfg, g=g, dataset_name=Path(args.graph).stem)
    out = _out_dir(args)
    harness.write_results(rows, out / "baseline.csv")
    for row in rows:
        print(
            f"{row.method} b={row.budget}: spread {row.spread_mean:.3f} "
            f"(select {row.select_ms:.1f} ms)"
        )
    return 0


def cmd_bench(args):
    section = _config_section(args, "bench")
    kind = _resolve(args, section, "kind", "forward-scaling", str)
    out = _out_dir(args)
    rng_master = args.seed
    rows = []
    if kind == "forward-scaling":
        n = _resolve(args, section, "n", 200, _coerce_int)
        cfg = gnn.GnnConfig(dim=32, layers=3)
        store = gnn.init_params(cfg, stream(rng_master, "bench-params"))
        from .embedding import InitEmbedding

        emb = InitEmbedding.gaussian(n, cfg.dim, stream(rng_master, "bench-emb"))
        for factor in (1, 2, 4):
            g = _er_with_edge_budget(n, factor * 4 * n, rng_master)
            elapsed = _time_forward(g, emb, store, cfg)
            rows.append({"kind": kind, "n": n, "edges": g.n_edges, "ms": elapsed})
    elif kind == "inference-budgets":
        if not args.checkpoint or not args.graph:
            print("inference-budgets needs --checkpoint and --graph", file=sys.stderr)
            return 2
        g = read_graph(args.graph)
        store, ddqn_cfg, _ = harness.load_checkpoint(args.checkpoint)
        from .embedding import InitEmbedding

        emb = InitEmbedding.surrogate(g.n, ddqn_cfg.gnn.dim)
        for b in (2, 4, 8, min(16, g.n)):
            t0 = time.perf_counter()
            agent.infer_one_time(g, emb, store, ddqn_cfg, b)
            one = (time.perf_counter() - t0) * 1e3
            t0 = time.perf_counter()
            agent.infer_iterative(g, emb, store, ddqn_cfg, b)
            rows.append(
                {
                    "kind": kind,
                    "budget": b,
                    "one_time_ms": one,
                    "iterative_ms": (time.perf_counter() - t0) * 1e3,
                }
            )
    else:
        print(f"unknown bench kind {kind!r}", file=sys.stderr)
        return 2
    path = out / "bench.json"
    path.write_text(json.dumps(rows, indent=2))
    print(json.dumps(rows, indent=2))
    return 0


def _er_with_edge_budget(n, directed_edges, seed):
    pairs = n * (n - 1) // 2
    p = min(1.0, directed_edges / (2 * pairs))
    g = generate_er(n, p, stream(seed, "bench-graph", directed_edges))
    return g.with_weights(EdgeWeightScheme.in_degree())


def _time_forward(g, emb, store, cfg, reps=15):
    with no_grad():
        gnn.forward(g, emb, (), store, cfg)  # warm caches
        t0 = time.perf_counter()
        for _ in range(reps):
            gnn.forward(g, emb, (), store, cfg)
    return (time.perf_counter() - t0) * 1e3 / reps


def cmd_fetch(args):
    try:
        path = harness.fetch_dataset(
            args.name or args.url, args.cache or "dataset-cache", offline=args.offline
        )
    except RuntimeError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="seedq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="sectioned key-value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--offline", action="store_true")
        p.add_argument("--threads", type=int, default=None)
        if out:
            p.add_argument("--out", help="output directory (default ./out)")

    p = sub.add_parser("gen-graphs", help="generate a weighted ER training suite")
    common(p)
    p.add_argument("--count", type=int)
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--scheme")
    p.set_defaults(func=cmd_gen_graphs)

    p = sub.add_parser("pdw", help="learn initial walk embeddings for one graph")
    common(p)
    p.add_argument("--graph", required=True)
    for flag, typ in (
        ("--dim", int),
        ("--context-size", int),
        ("--hops", int),
        ("--negatives", int),
        ("--epochs", int),
    ):
        p.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ)
    p.add_argument("--local-fraction", dest="local_fraction", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--restart", type=float)
    p.set_defaults(func=cmd_pdw)

    p = sub.add_parser("train", help="train the value network on a graph suite")
    common(p)
    p.add_argument("--graphs-dir", dest="graphs_dir", required=True)
    for flag, typ in (
        ("--episodes", int),
        ("--budget", int),
        ("--n-step", int),
        ("--batch", int),
        ("--sync-every", int),
        ("--capacity", int),
        ("--pool-factor", int),
        ("--dim", int),
        ("--layers", int),
    ):
        p.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--ablation")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="pick seeds with a trained checkpoint")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("one-time", "iterative"))
    p.add_argument("--b", type=int)
    p.add_argument("--ablation")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="Monte-Carlo spread of a seed file")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--sims", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="run one classical baseline")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--method")
    p.add_argument("--b", type=int)
    p.add_argument("--sims", type=int)
    p.add_argument("--celf-sims", dest="celf_sims", type=int)
    p.add_argument("--pool-factor", dest="pool_factor", type=int)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench", help="timing studies (forward scaling, budgets)")
    common(p)
    p.add_argument("--kind")
    p.add_argument("--n", type=int)
    p.add_argument("--graph")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fetch", help="download a dataset into the cache")
    common(p, out=False)
    p.add_argument("--name")
    p.add_argument("--url")
    p.add_argument("--cache")
    p.set_defaults(func=cmd_fetch)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"missing input file: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
