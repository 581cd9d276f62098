"""Exact decision trees for small instances.

A decision tree unrolls every observation branch of a sequential seeding
process. Nodes are decision points carrying the chosen seed; edges carry
statuses (what is active, which edges have been seen live or dead) together
with their conditional probability given the parent edge. The edge into the
root node carries the all-inactive empty status.

A plain tree has k seeding levels. Between levels the status branches over
the feedback window of the schedule; after the k-th seed it branches over
full termination, so leaf-adjacent edges always carry final statuses. The
deferred variant stops activating after k-1 seeds: the level-k node picks a
node without activating it (its `deferred` flag is set), branches over
termination of the running cascade, and each leaf stores the picked node as
a seed to be activated at the very end.

Everything here is evaluated exactly: policies are deterministic decision
rules evaluated with exact marginals, probabilities are enumerated, and the
profit of a tree integrates the final spread over leaf-adjacent statuses.
Horizons inside tree evaluation are unbounded unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .diffusion import (
    ENUM_CAP_DEFAULT,
    enumerate_statuses,
    expected_active_exact,
    expected_marginal_exact,
)
from .graph import Graph
from .policy import Greedy, HighDegree, Random
from .process import FeedbackSchedule, Finite, FullAdoption, NonAdaptive
from .realization import (
    UNBOUNDED,
    Horizon,
    Realization,
    Status,
    conditional_prob,
    empty_status,
    is_compatible,
    realization_prob,
    status_text,
    status_union,
)

__all__ = [
    "TreeNode",
    "TreeEdge",
    "DecisionTree",
    "TreeCapExceeded",
    "exact_greedy_rule",
    "build_policy_tree",
    "tree_profit",
    "condition_tree",
    "concat_trees",
    "regret_ratio",
    "regret_upper_bound",
    "regret_ratio_tree",
    "max_sibling_prob_error",
    "Theorem1Report",
    "Lemma3Report",
    "check_theorem1",
    "check_lemma3",
    "dump_tree",
]

TREE_EDGE_CAP = 1_000_000


class TreeCapExceeded(RuntimeError):
    """The tree under construction grew past the edge cap."""


@dataclass
class TreeNode:
    """One decision point.

    seed is the node activated on arrival here; on a leaf it is instead the
    pending activation inherited from a deferred decision (or None). A node
    with deferred=True chose `pending` without activating it; the leaves of
    its subtree carry that choice in their seed field.
    """

    level: int
    seed: int | None
    deferred: bool
    pending: int | None
    edges: list["TreeEdge"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.edges and not self.deferred


@dataclass
class TreeEdge:
    status: Status
    prob: float
    child: TreeNode


@dataclass
class DecisionTree:
    """root is the edge carrying the tree's entry status (the empty status
    for built trees); None encodes the empty tree that conditioning on an
    incompatible status produces."""

    g: Graph
    root: TreeEdge | None
    k: int
    lazy: bool

    def iter_edges(self):
        """Yield (level-of-origin, edge); the root edge originates at 0."""
        if self.root is None:
            return
        stack = [(0, self.root)]
        while stack:
            lvl, e = stack.pop()
            yield lvl, e
            for e2 in e.child.edges:
                stack.append((e.child.level, e2))

    def iter_nodes(self):
        if self.root is None:
            return
        stack = [self.root.child]
        while stack:
            n = stack.pop()
            yield n
            for e in n.edges:
                stack.append(e.child)


def _enum_cached(g: Graph, u: Status, rounds: int | None, cap: int):
    cache = getattr(g, "_enum_cache", None)
    if cache is None:
        cache = {}
        g._enum_cache = cache
    key = (u, rounds)
    hit = cache.get(key)
    if hit is None:
        hit = enumerate_statuses(g, u, rounds, cap=cap)
        cache[key] = hit
    return hit


def exact_greedy_rule(g: Graph, cap: int = ENUM_CAP_DEFAULT):
    """Decision rule maximizing the exact expected marginal gain.

    Ties break toward the smallest node id. Unlike the sampling-based Greedy
    policy this is deterministic and exact, which the tree checks require.
    """

    def rule(u: Status) -> int:
        best_v, best_gain = -1, -math.inf
        for v in range(g.n):
            if v in u.active:
                continue
            gain = expected_marginal_exact(g, u.active, {v}, u.observed, UNBOUNDED, cap=cap)
            if gain > best_gain:
                best_v, best_gain = v, gain
        if best_v < 0:
            raise ValueError("every node is active; no seed candidate left")
        return best_v

    return rule


def _degree_rule(g: Graph):
    def rule(u: Status) -> int:
        best = None
        for v in range(g.n):
            if v in u.active:
                continue
            if best is None or int(g.out_deg[v]) > int(g.out_deg[best]):
                best = v
        if best is None:
            raise ValueError("every node is active; no seed candidate left")
        return best

    return rule


def _as_rule(g: Graph, policy):
    if callable(policy):
        return policy
    if isinstance(policy, Greedy):
        return exact_greedy_rule(g)
    if isinstance(policy, HighDegree):
        return _degree_rule(g)
    if isinstance(policy, Random):
        raise ValueError("tree building needs a deterministic decision rule")
    raise TypeError(f"unknown policy {policy!r}")


def _window_rounds(sched: FeedbackSchedule) -> int | None:
    if isinstance(sched, Finite):
        return sched.rounds
    if isinstance(sched, FullAdoption):
        return None
    if isinstance(sched, NonAdaptive):
        return 0
    raise TypeError(f"unknown schedule {sched!r}")


def build_policy_tree(
    g: Graph,
    policy,
    k: int,
    sched: FeedbackSchedule,
    lazy: bool = False,
    cap: int = TREE_EDGE_CAP,
) -> DecisionTree:
    """Exhaustive decision tree of the k-seed process under `policy`.

    policy may be a deterministic callable Status -> node id or a policy
    object; Greedy is evaluated with exact marginals (no sampling), Random
    is rejected. lazy=True defers the k-th activation as described in the
    module docstring. Raises TreeCapExceeded past `cap` tree-edges.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    rule = _as_rule(g, policy)
    window = _window_rounds(sched)
    counter = [0]

    def bump():
        counter[0] += 1
        if counter[0] > cap:
            raise TreeCapExceeded(f"tree exceeds {cap} edges")

    def expand(u: Status, level: int, pending: int | None) -> TreeNode:
        saturated = len(u.active) == g.n
        if level > k or saturated:
            return TreeNode(level, pending, False, None)
        if lazy and level == k:
            v = rule(u)
            node = TreeNode(level, None, True, v)
            for u2, p in _enum_cached(g, u, None, ENUM_CAP_DEFAULT):
                bump()
                node.edges.append(TreeEdge(u2, p, expand(u2, level + 1, v)))
            return node
        v = rule(u)
        seeded = Status(u.active | {v}, u.observed)
        rounds = window if level < k else None
        node = TreeNode(level, v, False, None)
        for u2, p in _enum_cached(g, seeded, rounds, ENUM_CAP_DEFAULT):
            bump()
            node.edges.append(TreeEdge(u2, p, expand(u2, level + 1, pending)))
        return node

    bump()
    root = TreeEdge(empty_status(), 1.0, expand(empty_status(), 1, None))
    return DecisionTree(g, root, k, lazy)


def tree_profit(g: Graph, t: DecisionTree) -> float:
    """Expected final spread realized by the tree.

    Sums, over leaf-adjacent edges, the unconditional probability of the
    edge's realization times the exact expected unbounded spread from the
    edge's active set plus the leaf's pending seed.
    """
    if t.root is None:
        return 0.0
    total = 0.0
    for _, e in t.iter_edges():
        if not e.child.is_leaf:
            continue
        u = e.status
        sources = u.active if e.child.seed is None else u.active | {e.child.seed}
        total += realization_prob(g, u.observed) * expected_active_exact(
            g, sources, u.observed, UNBOUNDED
        )
    return total


def condition_tree(t: DecisionTree, u: Status) -> DecisionTree:
    """Prune branches incompatible with u and merge u into every status.

    Sibling probabilities are recomputed from the merged realizations and
    still sum to 1: pruned siblings carried exactly the mass conditioning
    removes. Conditioning on an incompatible root yields the empty tree.
    """
    if t.root is None:
        return DecisionTree(t.g, None, t.k, t.lazy)
    g = t.g

    def cond(edge: TreeEdge, parent: Status | None) -> TreeEdge | None:
        if not is_compatible(edge.status.observed, u.observed):
            return None
        merged = status_union(edge.status, u)
        prob = 1.0 if parent is None else conditional_prob(g, merged.observed, parent.observed)
        old = edge.child
        node = TreeNode(old.level, old.seed, old.deferred, old.pending)
        for e2 in old.edges:
            kept = cond(e2, merged)
            if kept is not None:
                node.edges.append(kept)
        return TreeEdge(merged, prob, node)

    return DecisionTree(g, cond(t.root, None), t.k, t.lazy)


def concat_trees(t1: DecisionTree, t2: DecisionTree, cap: int = TREE_EDGE_CAP) -> DecisionTree:
    """Continue t1 with t2: every leaf of t1 becomes t2 conditioned on the
    status that led there.

    A leaf's own pending seed is discarded; whatever t2 plants replaces it.
    The inputs are not modified.
    """
    if t1.g is not t2.g:
        raise ValueError("trees must be over the same graph")
    if t1.root is None:
        return DecisionTree(t1.g, None, t1.k + t2.k, t2.lazy)
    counter = [0]

    def bump():
        counter[0] += 1
        if counter[0] > cap:
            raise TreeCapExceeded(f"tree exceeds {cap} edges")

    def copy_edge(edge: TreeEdge) -> TreeEdge:
        bump()
        old = edge.child
        if old.is_leaf:
            sub = condition_tree(t2, edge.status)
            if sub.root is None:
                return TreeEdge(edge.status, edge.prob, TreeNode(old.level, None, False, None))
            for _ in sub.iter_edges():
                bump()
            return TreeEdge(edge.status, edge.prob, sub.root.child)
        node = TreeNode(old.level, old.seed, old.deferred, old.pending)
        for e2 in old.edges:
            node.edges.append(copy_edge(e2))
        return TreeEdge(edge.status, edge.prob, node)

    return DecisionTree(t1.g, copy_edge(t1.root), t1.k + t2.k, t2.lazy)


def _best_gain(g: Graph, u: Status, t: Horizon, cap: int) -> float:
    """max over inactive v of the exact marginal; 0 when all nodes are active."""
    best = 0.0
    found = False
    for v in range(g.n):
        if v in u.active:
            continue
        gain = expected_marginal_exact(g, u.active, {v}, u.observed, t, cap=cap)
        if not found or gain > best:
            best, found = gain, True
    return best


def _regret_parts(g: Graph, u: Status, t: Horizon, d: Horizon, cap: int) -> tuple[float, float]:
    if not t.unbounded and d.unbounded:
        raise ValueError("a bounded horizon cannot wait an unbounded number of rounds")
    denom = _best_gain(g, u, t, cap)
    t_rem = t if d.unbounded else t.minus(d.rounds)
    num = 0.0
    for u2, p in _enum_cached(g, u, d.rounds, cap):
        num += p * _best_gain(g, u2, t_rem, cap)
    return num, denom


def regret_ratio(g: Graph, u: Status, t: Horizon, d: Horizon, cap: int = ENUM_CAP_DEFAULT) -> float:
    """How much seeding value the best immediate choice can lose by instead
    waiting d rounds and then choosing: expected best gain after the wait
    (at the shortened horizon) over best gain now.

    Needs at least one inactive node and a positive denominator.
    """
    if len(u.active) == g.n:
        raise ValueError("regret ratio needs an inactive node")
    num, denom = _regret_parts(g, u, t, d, cap)
    if denom <= 0.0:
        raise ValueError(
            "best immediate gain is zero (every inactive node is already "
            "sure to activate); the ratio is undefined here"
        )
    return num / denom


def regret_upper_bound(
    g: Graph, u: Status, t: Horizon, d: Horizon, cap: int = ENUM_CAP_DEFAULT
) -> float:
    """Cheap upper bound on regret_ratio via the pessimistic final status.

    Declares every unobserved out-edge of an active node dead; the waiting
    process from that status can only sit still, so a single marginal
    evaluation bounds the numerator from above.
    """
    if len(u.active) == g.n:
        raise ValueError("regret ratio needs an inactive node")
    if not t.unbounded and d.unbounded:
        raise ValueError("a bounded horizon cannot wait an unbounded number of rounds")
    denom = _best_gain(g, u, t, cap)
    if denom <= 0.0:
        raise ValueError(
            "best immediate gain is zero (every inactive node is already "
            "sure to activate); the ratio is undefined here"
        )
    extra_dead = set()
    for v in sorted(u.active):
        for eid in g.out_edges(v):
            e = int(eid)
            if e not in u.observed.live and e not in u.observed.dead:
                extra_dead.add(e)
    u_f = Status(u.active, Realization(u.observed.live, u.observed.dead | frozenset(extra_dead)))
    t_rem = t if d.unbounded else t.minus(d.rounds)
    return _best_gain(g, u_f, t_rem, cap) / denom


def regret_ratio_tree(g: Graph, t: DecisionTree, cap: int = ENUM_CAP_DEFAULT) -> float:
    """Largest unbounded-horizon regret ratio over every tree-edge status.

    Statuses where no gain is possible (all nodes active, or every inactive
    node is sure to activate anyway) contribute the neutral value 1.
    """
    worst = 1.0
    for _, e in t.iter_edges():
        u = e.status
        if len(u.active) == g.n:
            continue
        num, denom = _regret_parts(g, u, UNBOUNDED, UNBOUNDED, cap)
        if denom <= 1e-12:
            if num > 1e-9:
                return math.inf
            continue
        worst = max(worst, num / denom)
    return worst


def max_sibling_prob_error(t: DecisionTree) -> float:
    """Largest |1 - sum of sibling edge probabilities| over internal nodes."""
    worst = 0.0
    for n in t.iter_nodes():
        if n.edges:
            worst = max(worst, abs(1.0 - math.fsum(e.prob for e in n.edges)))
    return worst


@dataclass
class Theorem1Report:
    F_greedy: float
    F_opt: float
    alpha: float
    bound_satisfied: bool


def _optimal_profit(g: Graph, k: int, sched: FeedbackSchedule, cap: int) -> float:
    """Best achievable expected spread, maximized over every decision rule.

    Depth-first over reachable statuses with memoization; deterministic
    rules suffice since each decision independently maximizes a conditional
    expectation.
    """
    window = _window_rounds(sched)
    memo: dict[tuple[Status, int], float] = {}

    def value(u: Status, left: int) -> float:
        if left == 0 or len(u.active) == g.n:
            return expected_active_exact(g, u.active, u.observed, UNBOUNDED, cap=cap)
        key = (u, left)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best = -math.inf
        for v in range(g.n):
            if v in u.active:
                continue
            seeded = Status(u.active | {v}, u.observed)
            if left == 1:
                val = expected_active_exact(g, seeded.active, seeded.observed, UNBOUNDED, cap=cap)
            else:
                val = 0.0
                for u2, p in _enum_cached(g, seeded, window, cap):
                    val += p * value(u2, left - 1)
            best = max(best, val)
        memo[key] = best
        return best

    return value(empty_status(), k)


def check_theorem1(
    g: Graph, k: int, sched: FeedbackSchedule, tol: float = 1e-9, cap: int = ENUM_CAP_DEFAULT
) -> Theorem1Report:
    """Compare exact greedy against the best possible decision rule.

    Builds the deferred greedy tree, takes its profit and its worst regret
    ratio alpha, exhaustively maximizes the profit over all decision rules,
    and checks profit_greedy >= (1 - e^(-1/alpha)) * profit_best.
    """
    t_g = build_policy_tree(g, exact_greedy_rule(g, cap), k, sched, lazy=True)
    f_greedy = tree_profit(g, t_g)
    alpha = regret_ratio_tree(g, t_g, cap)
    f_opt = _optimal_profit(g, k, sched, cap)
    bound = (1.0 - math.exp(-1.0 / alpha)) * f_opt
    return Theorem1Report(f_greedy, f_opt, alpha, f_greedy >= bound - tol)


@dataclass
class Lemma3Report:
    alpha: float
    checks: list[tuple[int, int, float, float]]  # (i, l, lhs, rhs)
    violations: list[tuple[int, int, float, float]]
    ok: bool


def check_lemma3(
    g: Graph,
    k: int,
    d: Horizon,
    pi_star=None,
    tol: float = 1e-9,
    cap: int = ENUM_CAP_DEFAULT,
) -> Lemma3Report:
    """Stepwise bound behind the approximation guarantee.

    For i, l in {1..k} verifies that continuing i-1 completed greedy seeds
    with the l-th seed of a comparison rule gains at most alpha times the
    i-th greedy step's own gain:

        F(G_{i-1} + P_l) - F(G_{i-1} + P_{l-1})
            <= alpha * (F(G_i) - F(G_{i-1}))

    where G_j is the greedy tree truncated to j seeds, P_l the comparison
    tree truncated to l seeds, + the concatenation, and F(empty) = 0. The
    comparison rule defaults to highest out-degree.
    """
    sched: FeedbackSchedule = FullAdoption() if d.unbounded else Finite(d.rounds)
    rule_g = exact_greedy_rule(g, cap)
    rule_s = pi_star if pi_star is not None else _degree_rule(g)

    greedy_trees = [build_policy_tree(g, rule_g, j, sched, lazy=False) for j in range(k + 1)]
    star_trees = [build_policy_tree(g, rule_s, j, sched, lazy=False) for j in range(k + 1)]
    f_greedy = [tree_profit(g, t) for t in greedy_trees]

    t_g_full = build_policy_tree(g, rule_g, k, sched, lazy=True)
    alpha = regret_ratio_tree(g, t_g_full, cap)

    checks: list[tuple[int, int, float, float]] = []
    violations: list[tuple[int, int, float, float]] = []
    for i in range(1, k + 1):
        rhs = alpha * (f_greedy[i] - f_greedy[i - 1])
        prev = tree_profit(g, concat_trees(greedy_trees[i - 1], star_trees[0]))
        for l in range(1, k + 1):
            cur = tree_profit(g, concat_trees(greedy_trees[i - 1], star_trees[l]))
            lhs = cur - prev
            checks.append((i, l, lhs, rhs))
            if lhs > rhs + tol:
                violations.append((i, l, lhs, rhs))
            prev = cur
    return Lemma3Report(alpha, checks, violations, not violations)


def dump_tree(t: DecisionTree) -> str:
    """Indented one-line-per-element rendering, for debugging and reports."""
    if t.root is None:
        return "(empty tree)\n"
    lines: list[str] = []

    def walk(edge: TreeEdge, depth: int) -> None:
        pad = "  " * depth
        lines.append(f"{pad}[p={edge.prob:.6f}] {status_text(edge.status)}")
        n = edge.child
        if n.is_leaf:
            tail = f" activate {n.seed}" if n.seed is not None else ""
            lines.append(f"{pad}  leaf{tail}")
            return
        if n.deferred:
            lines.append(f"{pad}  defer {n.pending} (level {n.level})")
        else:
            lines.append(f"{pad}  seed {n.seed} (level {n.level})")
        for e2 in n.edges:
            walk(e2, depth + 1)

    walk(t.root, 0)
    return "\n".join(lines) + "\n"
