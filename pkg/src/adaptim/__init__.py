"""Adaptive influence maximization on the independent cascade model.

Simulation, reverse-reachable-set seeding, general round-batched feedback
schedules, deferred (lazy) execution, and an exact decision-tree laboratory
for machine-checking the adaptivity-gap style guarantees on small graphs.
"""

from .diffusion import (
    ENUM_CAP_DEFAULT,
    EnumerationCapExceeded,
    RoundOutcome,
    count_active,
    enumerate_statuses,
    expected_active_exact,
    expected_marginal_exact,
    expected_marginal_mc,
    marginal_delta,
    simulate_round,
)
from .graph import (
    FromFile,
    Graph,
    GraphFormatError,
    Uniform,
    WeightedCascade,
    load_graph,
    random_graph,
    save_graph,
)
from .policy import Greedy, HighDegree, PolicyKind, Random, decide
from .process import (
    DiffusionTrace,
    FEstimate,
    FeedbackSchedule,
    Finite,
    FullAdoption,
    NonAdaptive,
    estimate_F,
    run_lazy_process,
    run_process,
    run_replicate,
)
from .realization import (
    EMPTY_REALIZATION,
    UNBOUNDED,
    ConflictError,
    Horizon,
    NotFullRealizationError,
    NotSubRealizationError,
    Realization,
    Status,
    concat,
    conditional_prob,
    empty_status,
    is_compatible,
    is_final,
    is_full,
    is_sub,
    realization_prob,
    status_text,
    status_union,
    t_live_reachable,
    unobserved_edges,
)
from .rrset import (
    ROOT_COVERED,
    RRSet,
    coverage_counts,
    estimate_marginal,
    greedy_select,
    sample_rrset,
    sample_rrsets,
)
from .tree import (
    TREE_EDGE_CAP,
    DecisionTree,
    Lemma3Report,
    Theorem1Report,
    TreeCapExceeded,
    TreeEdge,
    TreeNode,
    build_policy_tree,
    check_lemma3,
    check_theorem1,
    concat_trees,
    condition_tree,
    dump_tree,
    exact_greedy_rule,
    max_sibling_prob_error,
    regret_ratio,
    regret_ratio_tree,
    regret_upper_bound,
    tree_profit,
)

__version__ = "0.1.0"
