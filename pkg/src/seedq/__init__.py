"""seedq: influence-maximization seed selection.

Independent-cascade spread estimators (Monte Carlo, reverse-reachable
pools, exact enumeration), walk-based initial node embeddings, three
coupled message-passing networks with a value head, n-step double deep
Q-learning, classical greedy baselines, and an experiment harness.
"""

__version__ = "0.1.0"

from .graph import EdgeWeightScheme, Graph, generate_er, load_edge_list, r_hop_out_neighbors
from .diffusion import (
    MonteCarloEstimator,
    ExactEstimator,
    PoolEstimator,
    RRPool,
    RRSet,
    SeedSet,
    SpreadEstimate,
    estimate_spread_mc,
    estimate_spread_ris,
    exact_spread,
    marginal_reward,
    sample_rr_set,
    simulate_ic,
)
from .embedding import InitEmbedding, WalkConfig, train_embeddings
from .gnn import GnnConfig, forward, init_params, q_value, q_values
from .agent import (
    DdqnConfig,
    ReplayBuffer,
    Transition,
    ablation_mode,
    infer_iterative,
    infer_one_time,
    select_action,
    td_targets,
    train,
)
from .baselines import celf_greedy, max_degree, naive_greedy, random_seeds, ris_greedy
from .numerics import AdamState, ParamStore, adam_step, backward, finite_difference_check
