"""Desk-scale acceptance suite: one test per criterion, one printed
PASS/FAIL line each (run with -s to see them).

The end-to-end criteria (4, 5, 7) share a single trained model from a
module-scoped fixture that follows the scaled protocol: 15 ER training
graphs with 15..50 nodes, edge probability 0.15, in-degree weights,
budget 5, 1000 episodes.
"""

import time

import numpy as np
import pytest

from seedq import agent, baselines, gnn
from seedq import numerics as nd
from seedq.agent import DdqnConfig, ReplayBuffer, Transition
from seedq.diffusion import (
    ExactEstimator,
    MonteCarloEstimator,
    PoolEstimator,
    RRPool,
    SeedSet,
    estimate_spread_mc,
    exact_spread,
)
from seedq.embedding import InitEmbedding, WalkConfig, pair_gradients, train_embeddings
from seedq.graph import EdgeWeightScheme, Graph, generate_er
from seedq.harness import evaluate_spread, generate_training_suite
from seedq.rngs import stream

pytestmark = pytest.mark.acceptance

MASTER = 91


def _report(ok, line):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {line}")
    return ok


def _small_weighted_graph(seed, max_edges=16):
    """Random weighted graph with at most `max_edges` directed edges."""
    rng = stream(seed, "acc-small")
    while True:
        n = int(rng.integers(6, 11))
        g = generate_er(n, float(rng.uniform(0.1, 0.35)), rng)
        if 2 <= g.n_edges <= max_edges:
            p = rng.uniform(0.05, 0.95, size=g.n_edges)
            return Graph(g.n, g.src, g.dst, p)


def _random_seed_set(g, rng):
    size = int(rng.integers(1, max(2, g.n // 2)))
    return SeedSet(rng.choice(g.n, size=size, replace=False).tolist(), g.n)


# --- criterion 1: estimator correctness ---------------------------------


def test_criterion_1_estimator_correctness():
    t0 = time.time()
    cases = 50
    mc_hits = 0
    worst_ris_rel = 0.0
    for i in range(cases):
        g = _small_weighted_graph(1000 + i)
        rng = stream(MASTER, "c1-seeds", i)
        seeds = _random_seed_set(g, rng)
        truth = exact_spread(g, seeds)
        mc = estimate_spread_mc(g, seeds, 100_000, stream(MASTER, "c1-mc", i))
        if abs(mc.mean - truth) <= 4 * max(mc.stderr, 1e-12):
            mc_hits += 1
        ris = RRPool.sample(g, 200_000, stream(MASTER, "c1-ris", i)).estimate(seeds)
        worst_ris_rel = max(worst_ris_rel, abs(ris.mean - truth) / truth)
    elapsed = time.time() - t0
    ok = mc_hits >= int(np.ceil(0.99 * cases)) and worst_ris_rel <= 0.02 and elapsed < 300
    _report(
        ok,
        f"criterion 1: MC within 4*stderr on {mc_hits}/{cases} (need >=99%), "
        f"worst RIS relative error {worst_ris_rel:.4f} (<=0.02), {elapsed:.0f}s (<300s)",
    )
    assert mc_hits >= int(np.ceil(0.99 * cases))
    assert worst_ris_rel <= 0.02
    assert elapsed < 300


# --- criterion 2: gradient integrity ------------------------------------


def _pdw_fd_check():
    """Analytic pair gradients and the tape, both against central
    differences of the negative-sampling objective term."""
    rng = stream(MASTER, "c2-pdw")
    dim = 6
    store = nd.ParamStore()
    store.add("x_u", rng.normal(0, 1.0))
    store.add("x_v", rng.normal(0, 1.0))
    store.add("s_u", rng.normal(0, 1.0, dim))
    store.add("t_v", rng.normal(0, 1.0, dim))
    negs = (0, 1)
    for w in negs:
        store.add(f"x_w{w}", rng.normal(0, 1.0))
        store.add(f"t_w{w}", rng.normal(0, 1.0, dim))

    def objective(s):
        def score(t_name, x_name):
            return nd.add(
                nd.mul(s.leaf("x_u"), nd.dot(s.leaf("s_u"), s.leaf(t_name))),
                s.leaf(x_name),
            )

        val = nd.log(nd.sigmoid(score("t_v", "x_v")))
        for w in negs:
            val = nd.add(val, nd.log(nd.sigmoid(nd.neg(score(f"t_w{w}", f"x_w{w}")))))
        return val

    tape_report = nd.finite_difference_check(objective, store, h=1e-5)

    emb = InitEmbedding(
        x=np.array([store["x_u"], store["x_v"], store["x_w0"], store["x_w1"]]),
        s=np.vstack([store["s_u"], np.zeros(dim), np.zeros(dim), np.zeros(dim)]),
        t=np.vstack([np.zeros(dim), store["t_v"], store["t_w0"], store["t_w1"]]),
    )
    analytic = pair_gradients(emb, 0, 1, (2, 3))
    store.zero_grads()
    nd.backward(objective(store), store)
    pairs = [
        ("x_u", analytic["x_u"]),
        ("x_v", analytic["x_v"]),
        ("s_u", analytic["s_u"]),
        ("t_v", analytic["t_v"]),
        ("x_w0", analytic[("x_w", 2)]),
        ("x_w1", analytic[("x_w", 3)]),
        ("t_w0", analytic[("t_w", 2)]),
        ("t_w1", analytic[("t_w", 3)]),
    ]
    analytic_err = max(
        np.max(np.abs(np.asarray(a) - store.grads[name]) / np.maximum(1.0, np.abs(a)))
        for name, a in pairs
    )
    return max(tape_report.max_rel_error, float(analytic_err))


def test_criterion_2_gradient_integrity():
    t0 = time.time()
    pdw_err = _pdw_fd_check()

    g = generate_er(20, 0.15, stream(MASTER, "c2-g")).with_weights(
        EdgeWeightScheme.in_degree()
    )
    cfg = gnn.GnnConfig(dim=6, layers=2)
    store = gnn.init_params(cfg, stream(MASTER, "c2-p"))
    emb = InitEmbedding.gaussian(g.n, cfg.dim, stream(MASTER, "c2-e"))
    seeds = [0, 7]

    def f_q(s):
        state = gnn.forward(g, emb, seeds, s, cfg)
        return gnn.q_value(3, seeds, state, s)

    def f_loss(s):
        state = gnn.forward(g, emb, seeds, s, cfg)
        q = gnn.q_value(3, seeds, state, s)
        diff = nd.sub(nd.constant(np.float64(2.0)), q)
        return nd.mul(diff, diff)

    q_err = nd.finite_difference_check(f_q, store).max_rel_error
    loss_err = nd.finite_difference_check(f_loss, store).max_rel_error
    elapsed = time.time() - t0
    ok = pdw_err <= 1e-5 and q_err <= 1e-4 and loss_err <= 1e-4 and elapsed < 120
    _report(
        ok,
        f"criterion 2: walk-objective gradients {pdw_err:.2e} (<=1e-5), "
        f"network value {q_err:.2e} / TD loss {loss_err:.2e} (<=1e-4), {elapsed:.0f}s (<120s)",
    )
    assert pdw_err <= 1e-5
    assert q_err <= 1e-4
    assert loss_err <= 1e-4
    assert elapsed < 120


# --- criterion 3: structural invariants ---------------------------------


def test_criterion_3_structural_invariants():
    checks = {}

    # attention rows normalize over every non-empty neighborhood
    g = generate_er(15, 0.3, stream(MASTER, "c3-g")).with_weights(EdgeWeightScheme.in_degree())
    cfg = gnn.GnnConfig(dim=5, layers=2)
    store = gnn.init_params(cfg, stream(MASTER, "c3-p"))
    emb = InitEmbedding.gaussian(g.n, cfg.dim, stream(MASTER, "c3-e"))
    worst = 0.0
    for kind, group in (("state", "dst"), ("source", "src"), ("target", "dst")):
        for layer in range(cfg.layers):
            coeff = gnn.attention_coefficients(g, emb.s, emb.t, store, layer, kind)
            seg = g.dst if group == "dst" else g.src
            sums = np.bincount(seg, weights=coeff, minlength=g.n)
            present = np.bincount(seg, minlength=g.n) > 0
            worst = max(worst, float(np.max(np.abs(sums[present] - 1.0))))
    checks["attention normalization"] = worst <= 1e-12

    # seed states pinned to one at every depth
    pinned = True
    for layers in (1, 2):
        state = gnn.forward(g, emb, [0, 4], store, gnn.GnnConfig(dim=5, layers=layers))
        pinned &= bool(np.all(state.x.value[[0, 4]] == 1.0))
    checks["seed pinning"] = pinned

    # permutation equivariance
    perm = stream(MASTER, "c3-perm").permutation(g.n)
    g2 = Graph(g.n, perm[g.src], perm[g.dst], g.p)
    emb2 = InitEmbedding(
        x=np.empty_like(emb.x), s=np.empty_like(emb.s), t=np.empty_like(emb.t)
    )
    emb2.x[perm], emb2.s[perm], emb2.t[perm] = emb.x, emb.s, emb.t
    sa = gnn.forward(g, emb, [1], store, cfg)
    sb = gnn.forward(g2, emb2, [int(perm[1])], store, cfg)
    checks["permutation equivariance"] = bool(
        np.allclose(sb.s.value[perm], sa.s.value, atol=1e-12)
        and np.allclose(sb.x.value[perm], sa.x.value, atol=1e-12)
    )

    # replay buffer: FIFO eviction and containment invariants
    buf = ReplayBuffer(4)
    for i in range(7):
        buf.push(Transition((), i, 0.0, (i,), True, 0))
    fifo_ok = [t.action for t in buf] == [3, 4, 5, 6]
    try:
        Transition((1,), 1, 0.0, (1, 2), False, 0)
        fifo_ok = False
    except ValueError:
        pass
    checks["replay FIFO/containment"] = fifo_ok

    # lazy greedy equals naive greedy under deterministic estimators
    agree = True
    for i in range(4):
        gg = _small_weighted_graph(3000 + i)
        exact_est = ExactEstimator(gg)
        agree &= (
            baselines.celf_greedy(gg, 3, exact_est).seeds.members
            == baselines.naive_greedy(gg, 3, exact_est).seeds.members
        )
        pool_est = PoolEstimator(RRPool.sample(gg, 600, stream(MASTER, "c3-pool", i)))
        agree &= (
            baselines.celf_greedy(gg, 3, pool_est).seeds.members
            == baselines.naive_greedy(gg, 3, pool_est).seeds.members
        )
    checks["CELF = naive greedy"] = agree

    ok = all(checks.values())
    detail = ", ".join(f"{name}: {'ok' if good else 'FAIL'}" for name, good in checks.items())
    _report(ok, f"criterion 3: {detail}")
    assert ok, detail


# --- criteria 4, 5, 7: the desk-scale study -----------------------------


@pytest.fixture(scope="module")
def desk_scale():
    t0 = time.time()
    scheme = EdgeWeightScheme.in_degree()
    train_graphs = generate_training_suite(15, 15, 50, 0.15, scheme, MASTER)
    held_out = generate_training_suite(5, 15, 50, 0.15, scheme, MASTER + 1)
    walk_cfg = WalkConfig(dim=64, epochs=3)
    inits = [
        train_embeddings(g, walk_cfg, stream(MASTER, "pdw", i))
        for i, g in enumerate(train_graphs)
    ]
    cfg = DdqnConfig(episodes=1000, budget=5, gnn=gnn.GnnConfig(dim=64, layers=3))
    result = agent.train(train_graphs, inits, cfg, seed=MASTER)
    train_minutes = (time.time() - t0) / 60

    b = 5
    spreads = {k: [] for k in ("one_time", "iterative", "tien", "celf", "random")}
    walk_select_s, surrogate_select_s = [], []
    for i, g in enumerate(held_out):
        t_sel = time.perf_counter()
        emb = train_embeddings(g, walk_cfg, stream(MASTER, "pdw-test", i))
        one = agent.infer_one_time(g, emb, result.store, cfg, b)
        walk_select_s.append(time.perf_counter() - t_sel)

        t_sel = time.perf_counter()
        emb_sur = InitEmbedding.surrogate(g.n, walk_cfg.dim)
        tien = agent.infer_one_time(g, emb_sur, result.store, cfg, b)
        surrogate_select_s.append(time.perf_counter() - t_sel)

        seeds = {
            "one_time": one,
            "iterative": agent.infer_iterative(g, emb, result.store, cfg, b),
            "tien": tien,
            "celf": baselines.celf_greedy(
                g, b, MonteCarloEstimator(g, 2000, stream(MASTER, "celf", i))
            ).seeds,
            "random": baselines.random_seeds(g, b, stream(MASTER, "rand", i)),
        }
        for name, ss in seeds.items():
            spreads[name].append(
                evaluate_spread(g, ss, 10_000, MASTER, scope=("acc-ev", name, i)).mean
            )

    return {
        "cfg": cfg,
        "walk_cfg": walk_cfg,
        "store": result.store,
        "held_out": held_out,
        "means": {k: float(np.mean(v)) for k, v in spreads.items()},
        "walk_select_s": walk_select_s,
        "surrogate_select_s": surrogate_select_s,
        "total_minutes": (time.time() - t0) / 60,
        "train_minutes": train_minutes,
    }


def test_criterion_4_desk_scale_end_to_end(desk_scale):
    means = desk_scale["means"]
    vs_celf = means["one_time"] / means["celf"]
    vs_random = means["one_time"] / means["random"]
    minutes = desk_scale["total_minutes"]
    ok = vs_celf >= 0.90 and vs_random >= 1.20 and minutes < 30
    _report(
        ok,
        "criterion 4: one-time spread "
        f"{means['one_time']:.2f} vs lazy-greedy {means['celf']:.2f} "
        f"(ratio {vs_celf:.3f} >= 0.90) vs random {means['random']:.2f} "
        f"(ratio {vs_random:.3f} >= 1.20), study {minutes:.1f} min (<30)",
    )
    assert vs_celf >= 0.90
    assert vs_random >= 1.20
    assert minutes < 30


def test_criterion_5_ablation_patterns(desk_scale):
    means = desk_scale["means"]
    tien_gap = abs(means["tien"] - means["one_time"]) / means["one_time"]
    iter_gap = abs(means["iterative"] - means["one_time"]) / means["one_time"]
    walk_s = np.array(desk_scale["walk_select_s"])
    sur_s = np.array(desk_scale["surrogate_select_s"])
    tien_faster = bool(np.all(sur_s < walk_s))

    # selection-time shape across budgets on one held-out graph
    g = desk_scale["held_out"][0]
    store, cfg = desk_scale["store"], desk_scale["cfg"]
    emb = InitEmbedding.surrogate(g.n, desk_scale["walk_cfg"].dim)
    budgets = [2, 4, 6, 8, 10]

    def med(fn, reps=7):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    one_times = [med(lambda bb=bb: agent.infer_one_time(g, emb, store, cfg, bb)) for bb in budgets]
    iter_times = [
        med(lambda bb=bb: agent.infer_iterative(g, emb, store, cfg, bb)) for bb in budgets
    ]
    one_flat = max(one_times) / min(one_times) <= 1.20
    iter_grows = iter_times[-1] > 2.0 * iter_times[0]

    ok = tien_gap <= 0.05 and iter_gap <= 0.05 and tien_faster and one_flat and iter_grows
    _report(
        ok,
        f"criterion 5: surrogate-vs-walk spread gap {tien_gap:.3f} (<=0.05), "
        f"iterative-vs-one-time gap {iter_gap:.3f} (<=0.05), surrogate strictly faster "
        f"({np.mean(sur_s) * 1e3:.0f} vs {np.mean(walk_s) * 1e3:.0f} ms): {tien_faster}, "
        f"one-time time spread {max(one_times) / min(one_times):.2f}x (<=1.20), "
        f"iterative growth {iter_times[-1] / iter_times[0]:.1f}x (>2.0)",
    )
    assert tien_gap <= 0.05
    assert iter_gap <= 0.05
    assert tien_faster
    assert one_flat
    assert iter_grows


def test_criterion_7_generalization_smoke(desk_scale):
    g = desk_scale["held_out"][0].with_weights(EdgeWeightScheme.constant(0.1))
    cfg, store = desk_scale["cfg"], desk_scale["store"]
    emb = train_embeddings(g, desk_scale["walk_cfg"], stream(MASTER, "c7-pdw"))
    learned = agent.infer_one_time(g, emb, store, cfg, 5)
    rand = baselines.random_seeds(g, 5, stream(MASTER, "c7-rand"))
    s_learned = evaluate_spread(g, learned, 10_000, MASTER, scope=("c7", "l")).mean
    s_random = evaluate_spread(g, rand, 10_000, MASTER, scope=("c7", "r")).mean
    ratio = s_learned / s_random
    ok = ratio >= 1.20
    _report(
        ok,
        f"criterion 7: 0.1-weight transfer spread {s_learned:.2f} vs random "
        f"{s_random:.2f} (ratio {ratio:.3f} >= 1.20)",
    )
    assert ratio >= 1.20


# --- criterion 6: complexity claims --------------------------------------


def test_criterion_6_complexity_claims():
    n = 220
    cfg = gnn.GnnConfig(dim=32, layers=3)
    store = gnn.init_params(cfg, stream(MASTER, "c6-p"))
    emb = InitEmbedding.gaussian(n, cfg.dim, stream(MASTER, "c6-e"))

    def er_with_edges(target_edges, tag):
        pairs = n * (n - 1) // 2
        p = target_edges / (2 * pairs)
        g = generate_er(n, p, stream(MASTER, "c6-g", tag))
        return g.with_weights(EdgeWeightScheme.in_degree())

    def med_forward(g, reps=9):
        with nd.no_grad():
            gnn.forward(g, emb, (), store, cfg)  # warm incidence cache
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                gnn.forward(g, emb, (), store, cfg)
                times.append(time.perf_counter() - t0)
        return float(np.median(times))

    g1 = er_with_edges(1200, 1)
    g2 = er_with_edges(2400, 2)
    t1, t2 = med_forward(g1), med_forward(g2)
    edge_ratio = g2.n_edges / g1.n_edges
    time_ratio = t2 / t1

    # one-time inference cost flat in the budget
    g = generate_er(60, 0.15, stream(MASTER, "c6-inf")).with_weights(
        EdgeWeightScheme.in_degree()
    )
    emb_inf = InitEmbedding.gaussian(g.n, cfg.dim, stream(MASTER, "c6-ie"))
    dd = DdqnConfig(episodes=1, budget=5, gnn=cfg)

    def med(fn, reps=9):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    budget_times = [
        med(lambda bb=bb: agent.infer_one_time(g, emb_inf, store, dd, bb))
        for bb in (10, 20, 30, 40, 50)
    ]
    budget_spread = max(budget_times) / min(budget_times)

    ok = time_ratio <= 1.5 and budget_spread <= 1.35
    _report(
        ok,
        f"criterion 6: forward time x{time_ratio:.2f} when edges x{edge_ratio:.2f} "
        f"(<=1.5), one-time budget-time spread {budget_spread:.2f}x (<=1.35)",
    )
    assert time_ratio <= 1.5
    assert budget_spread <= 1.35
