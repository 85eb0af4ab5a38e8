"""Experiment orchestration: datasets, selection timing, evaluation, CSV.

The measurement chain mirrors the evaluation protocol: record the seed
set and the selection wall-time per (method, budget, repetition), then
estimate the spread of the recorded set with an independent Monte-Carlo
pass (10,000 simulations by default). Selection time never includes
evaluation time.
"""

import configparser
import csv
import hashlib
import json
import math
import time
import urllib.request
import warnings
import zipfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .agent import DdqnConfig, infer_iterative, infer_one_time, ablation_mode
from .diffusion import (
    ExactEstimator,
    MonteCarloEstimator,
    SeedSet,
    SpreadEstimate,
    as_seed_set,
    simulate_ic,
)
from .embedding import WalkConfig
from .gnn import GnnConfig
from .graph import EdgeWeightScheme, Graph, generate_er, load_edge_list, write_graph
from .numerics import ParamStore
from .rngs import stream

RESULT_COLUMNS = (
    "dataset",
    "method",
    "budget",
    "run",
    "spread_mean",
    "spread_stderr",
    "select_ms",
    "seed_set",
)

_MC_BLOCK = 2048


@dataclass
class ResultRow:
    dataset: str
    method: str
    budget: int
    run: int
    spread_mean: float
    spread_stderr: float
    select_ms: float
    seed_set: tuple

    def as_csv(self):
        return [
            self.dataset,
            self.method,
            self.budget,
            self.run,
            f"{self.spread_mean:.6f}" if not math.isnan(self.spread_mean) else "",
            f"{self.spread_stderr:.6f}" if not math.isnan(self.spread_stderr) else "",
            f"{self.select_ms:.3f}",
            " ".join(str(u) for u in self.seed_set),
        ]


@dataclass
class ExperimentConfig:
    dataset: str = ""                 # path of an edge-list file
    scheme: str = "in-degree"
    budgets: tuple = (5,)
    methods: tuple = ("random",)
    seed: int = 0
    eval_sims: int = 10000
    repetitions: int = 1
    out_dir: str = "out"
    ablation: str = "tiei"
    checkpoint: str = ""
    celf_sims: int = 2000
    ris_pool_factor: int = 256
    threads: int = 1

    def __post_init__(self):
        if not self.budgets or any(b <= 0 for b in self.budgets):
            raise ValueError("budgets must be non-empty and positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def read_config(path):
    """Sectioned key-value file -> {section: {key: value}} of strings."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _mc_block(args):
    g, members, sims, master, scope, block = args
    rng = stream(master, *scope, "mc-block", block)
    total = 0.0
    total_sq = 0.0
    for _ in range(sims):
        size = simulate_ic(g, members, rng)
        total += size
        total_sq += size * size
    return total, total_sq


def evaluate_spread(g, seeds, n_sims, master_seed, scope=(), threads=1) -> SpreadEstimate:
    """Blocked Monte-Carlo evaluation, identical for any thread count.

    Trials are split into fixed blocks whose streams are keyed by block
    index, so the estimate depends only on (graph, seeds, n_sims, seed).
    """
    seeds = as_seed_set(seeds, g.n)
    blocks = []
    offset = 0
    while offset < n_sims:
        size = min(_MC_BLOCK, n_sims - offset)
        blocks.append((g, seeds.members, size, master_seed, tuple(scope), len(blocks)))
        offset += size
    if threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_mc_block, blocks))
    else:
        parts = [_mc_block(b) for b in blocks]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / n_sims
    if n_sims > 1:
        var = max(0.0, (total_sq - n_sims * mean * mean) / (n_sims - 1))
        stderr = math.sqrt(var / n_sims)
    else:
        stderr = 0.0
    return SpreadEstimate(mean, stderr, n_sims)


# --- dataset generation and ingestion ---


def generate_training_suite(count, n_min, n_max, p_edge, scheme, seed):
    """ER graphs with node counts uniform in [n_min, n_max], weighted."""
    graphs = []
    for i in range(count):
        rng = stream(seed, "gen-graphs", i)
        n = int(rng.integers(n_min, n_max + 1))
        graphs.append(generate_er(n, p_edge, rng).with_weights(scheme))
    return graphs


def ingest_edge_file(path):
    """Read a raw dataset file into (edge-list text, directed flag).

    Tolerates MatrixMarket-style files: '%' comment lines, a 'rows cols
    nnz' size line, and the symmetric qualifier (treated as undirected).
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    directed = True
    is_mm = bool(lines) and lines[0].startswith("%%MatrixMarket")
    if is_mm and "symmetric" in lines[0].lower():
        directed = False
    data = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("%"):
            continue
        data.append(stripped)
    if is_mm and data:
        data = data[1:]  # drop the size line
    elif data and len(data[0].split()) == 3:
        # bare network-repository exports: leading "n n m" size line
        a, b, c = data[0].split()
        try:
            if int(a) == int(b) and float(c) > 1.0:
                data = data[1:]
        except ValueError:
            pass
    return "\n".join(data) + "\n", directed


def load_dataset(path, scheme, directed=None) -> Graph:
    """Ingest a dataset file and weight it with the scheme."""
    content, inferred = ingest_edge_file(path)
    if directed is None:
        directed = inferred
    return load_edge_list(content, directed=directed, scheme=scheme)


# --- dataset fetching with a content-hash cache ---

KNOWN_DATASETS = {
    "soc-dolphins": "https://nrvis.com/download/data/soc/soc-dolphins.zip",
}


def _cache_index(cache_dir):
    index_path = Path(cache_dir) / "index.json"
    if index_path.exists():
        return json.loads(index_path.read_text()), index_path
    return {}, index_path


def fetch_dataset(name_or_url, cache_dir, offline=False) -> str:
    """Download once into the cache; later calls hit the cache.

    Cached blobs are stored under their content hash and tracked by an
    index keyed on the source URL. In offline mode an uncached dataset is
    an error naming the expected cache location.
    """
    url = KNOWN_DATASETS.get(name_or_url, name_or_url)
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    index, index_path = _cache_index(cache)
    entry = index.get(url)
    if entry is not None:
        blob = cache / entry["filename"]
        if blob.exists():
            return str(blob)
    if offline:
        raise RuntimeError(
            f"offline mode and {name_or_url!r} is not cached under {cache}"
        )
    with urllib.request.urlopen(url) as resp:
        payload = resp.read()
    if len(payload) == 0:
        raise RuntimeError(f"fetched empty payload from {url}")
    digest = hashlib.sha256(payload).hexdigest()
    if entry is not None and entry["sha256"] != digest:
        warnings.warn(
            f"checksum changed for {url}; keeping note of the new content",
            stacklevel=2,
        )
    suffix = Path(url.split("?")[0]).suffix or ".dat"
    blob = cache / f"{digest[:16]}{suffix}"
    blob.write_bytes(payload)
    if suffix == ".zip":
        blob = Path(_extract_dataset(blob, cache, digest))
    index[url] = {"sha256": digest, "filename": blob.name}
    index_path.write_text(json.dumps(index, indent=2))
    return str(blob)


def _extract_dataset(zip_path, cache, digest):
    with zipfile.ZipFile(zip_path) as zf:
        names = [n for n in zf.namelist() if n.endswith((".mtx", ".txt", ".edges"))]
        if not names:
            raise RuntimeError(f"no edge list found inside {zip_path}")
        target = cache / f"{digest[:16]}_{Path(names[0]).name}"
        target.write_bytes(zf.read(names[0]))
    return str(target)


# --- checkpointing ---


def save_checkpoint(result, path):
    result.save(path)


def load_checkpoint(path):
    """Returns (store, DdqnConfig, seed) from a training checkpoint."""
    store, meta = ParamStore.load(path)
    cfg_dict = dict(meta.get("config", {}))
    gnn_cfg = GnnConfig(**cfg_dict.pop("gnn", {}))
    cfg = DdqnConfig(**{**cfg_dict, "gnn": gnn_cfg})
    return store, cfg, meta.get("seed", 0)


# --- selection methods ---


def _learned_context(cfg):
    if not cfg.checkpoint:
        raise ValueError("learned methods need a checkpoint path")
    store, ddqn_cfg, _ = load_checkpoint(cfg.checkpoint)
    selector = ablation_mode(cfg.ablation)
    walk_cfg = WalkConfig(dim=ddqn_cfg.gnn.dim)
    return store, ddqn_cfg, selector, walk_cfg


def _run_method(method, g, budget, cfg, rep, learned):
    """Returns (SeedSet, seconds). Timing covers selection only, including
    test-time embedding generation for learned methods."""
    rng = stream(cfg.seed, "select", method, budget, rep)
    if method == "random":
        t0 = time.perf_counter()
        return baselines.random_seeds(g, budget, rng), time.perf_counter() - t0
    if method == "max-degree":
        t0 = time.perf_counter()
        return baselines.max_degree(g, budget), time.perf_counter() - t0
    if method == "celf-mc":
        est = MonteCarloEstimator(g, cfg.celf_sims, rng)
        res = baselines.celf_greedy(g, budget, est)
        return res.seeds, res.wall_time
    if method == "celf-exact":
        res = baselines.celf_greedy(g, budget, ExactEstimator(g))
        return res.seeds, res.wall_time
    if method == "ris":
        res = baselines.ris_greedy(g, budget, cfg.ris_pool_factor * g.n, rng)
        return res.seeds, res.wall_time
    if method in ("one-time", "iterative"):
        store, ddqn_cfg, selector, walk_cfg = learned
        t0 = time.perf_counter()
        emb = selector.test_embedding(g, walk_cfg, rng)
        if method == "one-time":
            seeds = infer_one_time(g, emb, store, ddqn_cfg, budget)
        else:
            seeds = infer_iterative(g, emb, store, ddqn_cfg, budget)
        return seeds, time.perf_counter() - t0
    raise ValueError(f"unknown method {method!r}")


def run_experiment(cfg: ExperimentConfig, g=None, dataset_name=None):
    """Full (method x budget x repetition) grid; returns ResultRow list.

    Selection and evaluation use separate named streams of the master
    seed, so deterministic selectors reproduce their rows exactly and
    stochastic evaluation reproduces its means exactly.
    """
    if g is None:
        g = load_dataset(cfg.dataset, EdgeWeightScheme.parse(cfg.scheme))
    dataset_name = dataset_name or cfg.dataset or "graph"
    learned = None
    if any(m in ("one-time", "iterative") for m in cfg.methods):
        learned = _learned_context(cfg)
    rows = []
    for method in cfg.methods:
        for budget in cfg.budgets:
            if budget > g.n:
                warnings.warn(
                    f"skipping {method} at budget {budget}: graph has {g.n} nodes",
                    stacklevel=2,
                )
                rows.append(
                    ResultRow(dataset_name, method, budget, 0, float("nan"), float("nan"), 0.0, ())
                )
                continue
            for rep in range(cfg.repetitions):
                seeds, select_s = _run_method(method, g, budget, cfg, rep, learned)
                est = evaluate_spread(
                    g,
                    seeds,
                    cfg.eval_sims,
                    cfg.seed,
                    scope=("evaluate", method, budget, rep),
                    threads=cfg.threads,
                )
                rows.append(
                    ResultRow(
                        dataset=dataset_name,
                        method=method,
                        budget=budget,
                        run=rep,
                        spread_mean=est.mean,
                        spread_stderr=est.stderr,
                        select_ms=select_s * 1e3,
                        seed_set=tuple(g.labels[u] for u in seeds),
                    )
                )
    return rows


def write_results(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def aggregate_rows(rows):
    """Mean spread and selection time per (method, budget) over runs."""
    groups = {}
    for row in rows:
        if math.isnan(row.spread_mean):
            continue
        groups.setdefault((row.method, row.budget), []).append(row)
    out = []
    for (method, budget), grp in sorted(groups.items()):
        out.append(
            {
                "method": method,
                "budget": budget,
                "spread_mean": float(np.mean([r.spread_mean for r in grp])),
                "select_ms": float(np.mean([r.select_ms for r in grp])),
                "runs": len(grp),
            }
        )
    return out


def write_manifest(path, cfg, extra=None):
    """Record config, seed, version, and input hashes next to the results."""
    from . import __version__

    payload = {
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in vars(cfg).items()},
        "seed": cfg.seed,
        "version": __version__,
    }
    if cfg.checkpoint:
        try:
            store, _, _ = load_checkpoint(cfg.checkpoint)
            payload["checkpoint_sha256"] = store.state_hash()
        except FileNotFoundError:
            payload["checkpoint_sha256"] = None
    payload.update(extra or {})
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
