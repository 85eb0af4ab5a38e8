"""Three coupled message-passing networks and the action-value head.

Per layer, every node updates three quantities read synchronously from the
previous layer: a scalar activation state X (pinned to 1 for current
seeds), an influence-capacity vector S aggregated over out-neighbors, and
an influence-tendency vector T aggregated over in-neighbors. Edge
importances blend the static edge probability with an attention weight
computed from projected (S, T) pairs and normalized per neighborhood.

After K layers the value of picking candidate u given seed set S_t is

    q = out_w . relu([cand_proj S_u, seed_proj sum_{v in S_t} S_v,
                      rest_proj sum_{w not in S_t+u} T_w])

where the trailing sum is formed once per state as (total - seeds - u).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import numerics as nd


@dataclass(frozen=True)
class GnnConfig:
    dim: int = 64        # width shared by every layer
    layers: int = 3      # message-passing rounds (K)
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("need at least one layer")


@dataclass
class GnnState:
    """Node states after the final layer (tape nodes)."""

    x: nd.Node  # (n,)
    s: nd.Node  # (n, l)
    t: nd.Node  # (n, l)


_SCALARS = {
    "state": ("edge_w", "attn_w", "self_w", "agg_w"),
    "source": ("edge_w", "attn_w", "self_w", "agg_w", "state_w"),
    "target": ("edge_w", "attn_w", "self_w", "agg_w", "state_w"),
}


def init_params(cfg: GnnConfig, rng) -> nd.ParamStore:
    """Fresh parameter store: gnn/layer{k}/... plus qhead/...

    Matrices, vectors, and gate biases are uniform +-1/sqrt(fan_in); the
    scalar coupling weights use fan_in 1 (uniform +-1). Zero biases are
    avoided on purpose: they park ReLU inputs exactly at the kink for any
    node whose previous gate layer is fully inactive, which breaks
    finite-difference verification.
    """
    store = nd.ParamStore()
    l = cfg.dim
    for k in range(cfg.layers):
        base = f"gnn/layer{k}/"
        store.init_uniform(base + "attn_proj", (l, l), rng)
        for name in ("attn_state", "attn_source", "attn_target"):
            store.init_uniform(base + name, (2 * l,), rng)
        for group, names in _SCALARS.items():
            for name in names:
                store.init_uniform(f"{base}{group}_{name}", (), rng)
        for gate in ("source_gate", "target_gate"):
            for i in range(3):
                store.init_uniform(f"{base}{gate}/w{i}", (l, l), rng)
                store.init_uniform(f"{base}{gate}/b{i}", (l,), rng)
    store.init_uniform("qhead/out_w", (3 * l,), rng)
    for name in ("cand_proj", "seed_proj", "rest_proj"):
        store.init_uniform(f"qhead/{name}", (l, l), rng)
    return store


def _incidence(g):
    """Per-graph cached edge/node incidence matrices.

    gather_* maps node rows to edge rows (x[src] as a matmul); scatter_*
    is its transpose (segment sum over edges into nodes).
    """
    if "incidence" not in g._cache:
        rows = np.arange(g.n_edges)
        ones = np.ones(g.n_edges)
        gsrc = sp.csr_matrix((ones, (rows, g.src)), shape=(g.n_edges, g.n))
        gdst = sp.csr_matrix((ones, (rows, g.dst)), shape=(g.n_edges, g.n))
        g._cache["incidence"] = {
            "gather_src": gsrc,
            "gather_dst": gdst,
            "scatter_src": sp.csr_matrix(gsrc.T),
            "scatter_dst": sp.csr_matrix(gdst.T),
        }
    return g._cache["incidence"]


def _segment_softmax(scores, seg, gather, scatter, n):
    """Per-neighborhood softmax via the cached incidence matrices."""
    shift = np.full(n, -np.inf)
    np.maximum.at(shift, seg, scores.value)
    e = nd.exp(nd.sub(scores, nd.constant(shift[seg])))
    denom = nd.spmatmul(scatter, e, gather)
    return nd.div(e, nd.spmatmul(gather, denom, scatter))


_ATTENTION_KINDS = {
    # score vector name, neighborhood the softmax normalizes over
    "state": ("attn_state", "dst"),
    "source": ("attn_source", "src"),
    "target": ("attn_target", "dst"),
}


def attention_scores(g, s_vals, t_vals, store, layer, kind, slope=0.2):
    """Unnormalized per-edge importance scores for one layer and kind.

    Edge (u, v) scores the concatenated projections [P S_u, P T_v] against
    the kind's weight vector, then LeakyReLU."""
    name, _ = _ATTENTION_KINDS[kind]
    with nd.no_grad():
        base = f"gnn/layer{layer}/"
        proj = store.leaf(base + "attn_proj")
        ps = nd.matmul(nd.constant(s_vals), nd.transpose(proj))
        pt = nd.matmul(nd.constant(t_vals), nd.transpose(proj))
        pair = nd.concat(
            [nd.gather_rows(ps, g.src), nd.gather_rows(pt, g.dst)], axis=1
        )
        return nd.leaky_relu(nd.matvec(pair, store.leaf(base + name)), slope).value


def attention_coefficients(g, s_vals, t_vals, store, layer, kind, slope=0.2):
    """Normalized attention per edge; sums to 1 over each neighborhood.

    The state and target kinds normalize over in-neighborhoods (edges
    grouped by target node), the source kind over out-neighborhoods."""
    _, group = _ATTENTION_KINDS[kind]
    seg = g.dst if group == "dst" else g.src
    scores = attention_scores(g, s_vals, t_vals, store, layer, kind, slope)
    with nd.no_grad():
        inc = _incidence(g)
        gather = inc[f"gather_{group}"]
        scatter = inc[f"scatter_{group}"]
        return _segment_softmax(nd.constant(scores), seg, gather, scatter, g.n).value


def _gate(store, prefix, h, n):
    """3-layer MLP (ReLU between layers, linear output) applied row-wise."""
    for i in range(3):
        w = store.leaf(f"{prefix}/w{i}")
        b = store.leaf(f"{prefix}/b{i}")
        h = nd.add(nd.matmul(h, nd.transpose(w)), nd.tile_rows(b, n))
        if i < 2:
            h = nd.relu(h)
    return h


def forward(g, emb, seeds, store, cfg: GnnConfig) -> GnnState:
    """Run K synchronous layers; returns final (X, S, T) tape nodes.

    Layer 0 is the frozen input embedding with X overridden to 1 on the
    seed set; the override is re-applied every layer so seeds stay pinned.
    Nodes with an empty neighborhood aggregate exactly zero.
    """
    n = g.n
    seeds = list(seeds)
    seed_mask = np.zeros(n)
    if seeds:
        seed_mask[seeds] = 1.0
    open_mask = 1.0 - seed_mask

    x0 = emb.x.copy()
    if seeds:
        x0[seeds] = 1.0
    x = nd.constant(x0)
    s = nd.constant(emb.s)
    t = nd.constant(emb.t)
    src, dst = g.src, g.dst
    inc = _incidence(g)
    g_src, g_dst = inc["gather_src"], inc["gather_dst"]
    s_src, s_dst = inc["scatter_src"], inc["scatter_dst"]
    p_edge = nd.constant(g.p)
    slope = cfg.leaky_slope

    for k in range(cfg.layers):
        base = f"gnn/layer{k}/"
        proj = store.leaf(base + "attn_proj")
        ps = nd.matmul(s, nd.transpose(proj))
        pt = nd.matmul(t, nd.transpose(proj))
        pair = nd.concat(
            [nd.spmatmul(g_src, ps, s_src), nd.spmatmul(g_dst, pt, s_dst)], axis=1
        )

        def attention(name, seg, gather, scatter):
            scores = nd.leaky_relu(nd.matvec(pair, store.leaf(base + name)), slope)
            return _segment_softmax(scores, seg, gather, scatter, n)

        def blend(group, attn):
            edge_w = store.leaf(f"{base}{group}_edge_w")
            attn_w = store.leaf(f"{base}{group}_attn_w")
            return nd.add(nd.mul(edge_w, p_edge), nd.mul(attn_w, attn))

        # activation state: aggregate in-neighbor states
        influ = attention("attn_state", dst, g_dst, s_dst)
        agg_x = nd.spmatmul(
            s_dst, nd.mul(blend("state", influ), nd.spmatmul(g_src, x, s_src)), g_dst
        )
        x_open = nd.sigmoid(
            nd.add(
                nd.mul(store.leaf(base + "state_self_w"), x),
                nd.mul(store.leaf(base + "state_agg_w"), agg_x),
            )
        )
        x_next = nd.add(nd.mul(nd.constant(open_mask), x_open), nd.constant(seed_mask))

        # influence capacity: aggregate gated out-neighbor tendencies
        alpha = attention("attn_source", src, g_src, s_src)
        sgate = _gate(store, base + "source_gate", t, n)
        agg_s = nd.spmatmul(
            s_src, nd.scale_rows(blend("source", alpha), nd.spmatmul(g_dst, sgate, s_dst)), g_src
        )
        s_next = nd.sigmoid(
            nd.add(
                nd.add(
                    nd.mul(store.leaf(base + "source_self_w"), s),
                    nd.mul(store.leaf(base + "source_agg_w"), agg_s),
                ),
                nd.tile_cols(nd.mul(store.leaf(base + "source_state_w"), x), cfg.dim),
            )
        )

        # influence tendency: aggregate gated in-neighbor capacities
        phi = attention("attn_target", dst, g_dst, s_dst)
        tgate = _gate(store, base + "target_gate", s, n)
        agg_t = nd.spmatmul(
            s_dst, nd.scale_rows(blend("target", phi), nd.spmatmul(g_src, tgate, s_src)), g_dst
        )
        t_next = nd.sigmoid(
            nd.add(
                nd.add(
                    nd.mul(store.leaf(base + "target_self_w"), t),
                    nd.mul(store.leaf(base + "target_agg_w"), agg_t),
                ),
                nd.tile_cols(nd.mul(store.leaf(base + "target_state_w"), x), cfg.dim),
            )
        )

        x, s, t = x_next, s_next, t_next

    return GnnState(x, s, t)


def _seed_sums(state, seeds, dim):
    if seeds:
        idx = list(seeds)
        return (
            nd.sum_rows(nd.gather_rows(state.s, idx)),
            nd.sum_rows(nd.gather_rows(state.t, idx)),
        )
    zero = nd.constant(np.zeros(dim))
    return zero, zero


def q_values(g, state, seeds, store) -> nd.Node:
    """Value of every node as the next pick, as an (n,) node.

    Rows at seed positions are meaningless; callers mask them out. The
    "rest" tendency sum is the O(n) precompute total - seeds - candidate.
    """
    n = g.n
    dim = state.s.shape[1]
    seeds = list(seeds)
    seed_s, seed_t = _seed_sums(state, seeds, dim)
    cand = nd.matmul(state.s, nd.transpose(store.leaf("qhead/cand_proj")))
    seed_block = nd.tile_rows(nd.matvec(store.leaf("qhead/seed_proj"), seed_s), n)
    rest = nd.sub(nd.tile_rows(nd.sub(nd.sum_rows(state.t), seed_t), n), state.t)
    rest_block = nd.matmul(rest, nd.transpose(store.leaf("qhead/rest_proj")))
    hidden = nd.relu(nd.concat([cand, seed_block, rest_block], axis=1))
    return nd.matvec(hidden, store.leaf("qhead/out_w"))


def q_value(u, seeds, state, store) -> nd.Node:
    """Scalar value of candidate u given the current seed set."""
    seeds = list(seeds)
    if u in seeds:
        raise ValueError(f"node {u} is already a seed")
    dim = state.s.shape[1]
    seed_s, seed_t = _seed_sums(state, seeds, dim)
    cand = nd.matvec(store.leaf("qhead/cand_proj"), nd.row(state.s, u))
    seed_block = nd.matvec(store.leaf("qhead/seed_proj"), seed_s)
    rest = nd.sub(nd.sub(nd.sum_rows(state.t), seed_t), nd.row(state.t, u))
    rest_block = nd.matvec(store.leaf("qhead/rest_proj"), rest)
    hidden = nd.relu(nd.concat([cand, seed_block, rest_block], axis=0))
    return nd.dot(hidden, store.leaf("qhead/out_w"))
