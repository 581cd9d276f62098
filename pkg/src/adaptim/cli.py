"""Command-line experiment harness.

Three subcommands:

* ``trace``  - per-round active counts for every replicate, plus per-round
  mean and standard error, one block per feedback value. CSV.
* ``sweep``  - final mean spread per feedback value. CSV.
* ``verify`` - the small-instance verification battery (exact tree checks,
  estimator agreement, equivalence and bound properties). Text report;
  exit code 2 when any property is violated.

Exit codes: 0 ok, 1 usage, 2 verification failure, 3 I/O.

CSV output is bit-identical for identical configuration (including seed),
whatever the worker count: replicates are keyed by index, and aggregation
happens in index order after all replicates finish.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass

import numpy as np

from .diffusion import expected_marginal_exact
from .graph import FromFile, Graph, GraphFormatError, Uniform, WeightedCascade, load_graph
from .policy import Greedy, HighDegree, PolicyKind, Random
from .process import (
    FeedbackSchedule,
    Finite,
    FullAdoption,
    NonAdaptive,
    estimate_F,
    run_replicate,
)
from .realization import UNBOUNDED, Horizon, Realization, Status, empty_status, status_text
from .rrset import estimate_marginal, sample_rrset
from .tree import (
    build_policy_tree,
    check_lemma3,
    check_theorem1,
    concat_trees,
    exact_greedy_rule,
    max_sibling_prob_error,
    regret_ratio,
    regret_ratio_tree,
    regret_upper_bound,
    tree_profit,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this artifact reserves 2 for
    verification failures, so usage errors exit 1 instead."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_prob(text: str):
    if text == "wc":
        return WeightedCascade()
    if text == "file":
        return FromFile()
    if text.startswith("uniform:"):
        try:
            return Uniform(float(text.split(":", 1)[1]))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    raise argparse.ArgumentTypeError(f"unknown probability model {text!r}")


def _parse_policy(name: str, rr_samples: int) -> PolicyKind:
    if name == "greedy":
        return Greedy(n_samples=rr_samples)
    if name == "degree":
        return HighDegree()
    return Random()


def _parse_d_list(text: str) -> list[tuple[str, FeedbackSchedule]]:
    out: list[tuple[str, FeedbackSchedule]] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part == "inf":
            out.append(("inf", FullAdoption()))
        elif part == "0":
            out.append(("0", NonAdaptive()))
        else:
            try:
                rounds = int(part)
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad feedback value {part!r}")
            if rounds < 0:
                raise argparse.ArgumentTypeError(f"bad feedback value {part!r}")
            out.append((str(rounds), Finite(rounds)))
    if not out:
        raise argparse.ArgumentTypeError("empty feedback list")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, needs_graph=True):
        if needs_graph:
            p.add_argument("--graph", required=True, help="edge-list file")
            p.add_argument(
                "--prob",
                type=_parse_prob,
                default=WeightedCascade(),
                help="uniform:<p> | wc | file (default wc)",
            )
            p.add_argument("--policy", choices=["greedy", "degree", "random"], default="greedy")
            p.add_argument("--k", type=int, default=5)
            p.add_argument("--d", type=_parse_d_list, default=[("1", Finite(1))],
                           help='comma list; "0"=non-adaptive, "inf"=full adoption')
            p.add_argument("--reps", type=int, default=500)
            p.add_argument("--rr-samples", type=int, default=100_000)
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--out", default="-", help="output CSV path, - for stdout")
        p.add_argument("--seed", type=int, default=0)

    p_trace = sub.add_parser("trace", help="per-round curves per replicate and aggregate")
    common(p_trace)
    p_sweep = sub.add_parser("sweep", help="final spread per feedback value")
    common(p_sweep)
    p_verify = sub.add_parser("verify", help="run the exact verification battery")
    common(p_verify, needs_graph=False)
    p_verify.add_argument("--instances", type=int, default=25)
    return parser


def _check_config(args) -> str | None:
    if args.k < 1:
        return "--k must be at least 1"
    if args.reps < 1:
        return "--reps must be at least 1"
    if args.rr_samples < 1:
        return "--rr-samples must be at least 1"
    if args.workers < 1:
        return "--workers must be at least 1"
    return None


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _fmt(x: float) -> str:
    return repr(float(x))


def _run_traces(g, policy, k, sched, reps, seed, workers, lazy=False):
    from concurrent.futures import ThreadPoolExecutor

    def one(r):
        return run_replicate(g, policy, k, sched, UNBOUNDED, seed, r, lazy=lazy)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(reps)))
    return [one(r) for r in range(reps)]


def cmd_trace(args) -> int:
    g = load_graph(args.graph, args.prob)
    policy = _parse_policy(args.policy, args.rr_samples)
    out, closeit = _open_out(args.out)
    try:
        w = csv.writer(out)
        w.writerow(["policy", "d", "replicate", "round", "active_count", "mean_active", "stderr"])
        for label, sched in args.d:
            traces = _run_traces(g, policy, args.k, sched, args.reps, args.seed, args.workers)
            for r, tr in enumerate(traces):
                for i, c in enumerate(tr.active_per_round):
                    w.writerow([args.policy, label, r, i, c, "", ""])
            depth = max(len(tr.active_per_round) for tr in traces)
            padded = np.array(
                [tr.active_per_round + [tr.active_per_round[-1]] * (depth - len(tr.active_per_round))
                 for tr in traces],
                dtype=np.float64,
            )
            for i in range(depth):
                col = padded[:, i]
                se = float(col.std(ddof=1) / math.sqrt(len(traces))) if len(traces) > 1 else 0.0
                w.writerow([args.policy, label, "", i, "", _fmt(col.mean()), _fmt(se)])
    finally:
        if closeit:
            out.close()
    return 0


def cmd_sweep(args) -> int:
    g = load_graph(args.graph, args.prob)
    policy = _parse_policy(args.policy, args.rr_samples)
    out, closeit = _open_out(args.out)
    try:
        w = csv.writer(out)
        w.writerow(["policy", "d", "mean_final", "stderr", "replicates"])
        for label, sched in args.d:
            est = estimate_F(
                g, policy, args.k, sched, UNBOUNDED, args.reps, args.seed, workers=args.workers
            )
            w.writerow([args.policy, label, _fmt(est.mean), _fmt(est.stderr), args.reps])
    finally:
        if closeit:
            out.close()
    return 0


# ---------------------------------------------------------------- verify ----


def _rand_small_graph(rng, max_nodes=4, p_choices=(0.3, 0.5, 1.0), max_edges=None) -> Graph:
    n = int(rng.integers(2, max_nodes + 1))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    cap = len(pairs) if max_edges is None else min(max_edges, len(pairs))
    m = int(rng.integers(1, cap + 1))
    idx = rng.choice(len(pairs), size=m, replace=False)
    edges = [pairs[i] for i in idx]
    probs = [float(rng.choice(p_choices)) for _ in idx]
    return Graph(n, edges, probs)


def _rand_status(g: Graph, rng, live_to_inactive_ok=True) -> Status:
    active = frozenset(int(v) for v in range(g.n) if rng.random() < 0.4)
    live, dead = set(), set()
    for e in range(g.m):
        x = rng.random()
        if x < 0.25:
            if live_to_inactive_ok or int(g.dst[e]) in active:
                live.add(e)
        elif x < 0.5:
            dead.add(e)
    return Status(active, Realization(frozenset(live), frozenset(dead)))


def _describe(g: Graph, extra: str = "") -> str:
    edges = "; ".join(
        f"{int(g.src[e])}->{int(g.dst[e])} p={float(g.p[e])!r}" for e in range(g.m)
    )
    return f"n={g.n} edges: {edges}" + (f" | {extra}" if extra else "")


def _verify_estimator(rng, n_instances, report):
    ok_trials = total = 0
    for _ in range(n_instances):
        g = _rand_small_graph(rng, max_nodes=5, p_choices=(0.3, 0.5), max_edges=10)
        u = _rand_status(g, rng)
        inactive = [v for v in range(g.n) if v not in u.active]
        if not inactive:
            continue
        vstar = {inactive[int(rng.integers(len(inactive)))]}
        exact = expected_marginal_exact(g, u.active, vstar, u.observed, UNBOUNDED)
        samples = [sample_rrset(g, u.active, u.observed, UNBOUNDED, rng) for _ in range(20_000)]
        est = estimate_marginal(g, u.active, samples, vstar)
        total += 1
        if abs(est - exact) <= 0.03 * g.n:
            ok_trials += 1
        else:
            report.append(_describe(g, f"status {status_text(u)} vstar={vstar}: est {est} vs exact {exact}"))
    if total == 0:
        return True, "no usable trials"
    frac = ok_trials / total
    return frac >= 0.95, f"{ok_trials}/{total} trials within 0.03n"


def _verify_greedy_bound(rng, n_instances, report):
    for _ in range(n_instances):
        g = _rand_small_graph(rng)
        k = int(rng.integers(1, 3))
        d = [Finite(1), Finite(2), FullAdoption()][int(rng.integers(3))]
        rep = check_theorem1(g, k, d)
        if not rep.bound_satisfied:
            report.append(_describe(g, f"k={k} sched={d}: {rep}"))
            return False, "bound violated"
    return True, f"{n_instances} instances"


def _verify_deferred_equivalence(rng, n_instances, report):
    for _ in range(n_instances):
        g = _rand_small_graph(rng, max_nodes=6, max_edges=12)
        k = int(rng.integers(1, 3))
        sched = [Finite(1), FullAdoption()][int(rng.integers(2))]
        policy = [Greedy(n_samples=2000), HighDegree()][int(rng.integers(2))]
        seed = int(rng.integers(1 << 31))
        for r in range(50):
            plain = run_replicate(g, policy, k, sched, UNBOUNDED, seed, r, lazy=False)
            deferred = run_replicate(g, policy, k, sched, UNBOUNDED, seed, r, lazy=True)
            if plain.final_status.active != deferred.final_status.active:
                report.append(_describe(g, f"k={k} sched={sched} replicate={r}"))
                return False, "final active sets differ"
        t_plain = build_policy_tree(g, Greedy(), k, sched, lazy=False)
        t_lazy = build_policy_tree(g, Greedy(), k, sched, lazy=True)
        if abs(tree_profit(g, t_plain) - tree_profit(g, t_lazy)) > 1e-9:
            report.append(_describe(g, f"k={k} sched={sched}: tree profits differ"))
            return False, "tree profits differ"
    return True, f"{n_instances} instances, 50 replicates each"


def _verify_concat(rng, n_instances, report):
    for _ in range(n_instances):
        g = _rand_small_graph(rng)
        sched = [Finite(1), FullAdoption()][int(rng.integers(2))]
        t1 = build_policy_tree(g, HighDegree(), int(rng.integers(1, 3)), sched)
        t2 = build_policy_tree(g, Greedy(), int(rng.integers(1, 3)), sched)
        t12 = concat_trees(t1, t2)
        if max_sibling_prob_error(t12) > 1e-12 or max_sibling_prob_error(t1) > 1e-12:
            report.append(_describe(g, "sibling probabilities do not sum to 1"))
            return False, "probability sums off"
        if tree_profit(g, t12) < tree_profit(g, t2) - 1e-9:
            report.append(_describe(g, "concatenation decreased profit"))
            return False, "profit decreased"
    return True, f"{n_instances} tree pairs"


def _verify_stepwise(rng, n_instances, report):
    for _ in range(n_instances):
        g = _rand_small_graph(rng)
        k = int(rng.integers(1, 3))
        d = [Horizon.finite(1), Horizon.finite(2), UNBOUNDED][int(rng.integers(3))]
        rep = check_lemma3(g, k, d)
        if not rep.ok:
            report.append(_describe(g, f"k={k} d={d}: {rep.violations}"))
            return False, "stepwise bound violated"
    return True, f"{n_instances} instances"


def _verify_regret(rng, n_instances, report):
    for _ in range(n_instances):
        g = _rand_small_graph(rng, p_choices=(0.3, 0.5))
        u = _rand_status(g, rng, live_to_inactive_ok=False)
        if len(u.active) == g.n:
            continue
        ds = [Horizon.finite(0), Horizon.finite(1), Horizon.finite(2), UNBOUNDED]
        ratios = [regret_ratio(g, u, UNBOUNDED, d) for d in ds]
        bound = regret_upper_bound(g, u, UNBOUNDED, UNBOUNDED)
        if ratios[-1] > bound + 1e-9:
            report.append(_describe(g, f"{status_text(u)}: ratio {ratios[-1]} > bound {bound}"))
            return False, "upper bound violated"
        if any(r < 1.0 - 1e-9 for r in ratios):
            report.append(_describe(g, f"{status_text(u)}: ratio below 1: {ratios}"))
            return False, "ratio below 1"
        if any(ratios[i] > ratios[i + 1] + 1e-9 for i in range(len(ratios) - 1)):
            report.append(_describe(g, f"{status_text(u)}: not monotone: {ratios}"))
            return False, "not monotone in d"
    return True, f"{n_instances} statuses"


def _verify_gain_monotonicity(rng, n_instances, report):
    from .diffusion import enumerate_statuses

    done = 0
    while done < n_instances:
        g = _rand_small_graph(rng, p_choices=(0.3, 0.5))
        rule = exact_greedy_rule(g)
        u0 = empty_status()
        u1s = enumerate_statuses(g, Status(frozenset({rule(u0)}), u0.observed), None)
        u1 = u1s[int(rng.integers(len(u1s)))][0]
        inactive = [v for v in range(g.n) if v not in u1.active]
        if not inactive:
            continue
        extra = inactive[int(rng.integers(len(inactive)))]
        u2s = enumerate_statuses(g, Status(u1.active | {extra}, u1.observed), None)
        u2 = u2s[int(rng.integers(len(u2s)))][0]
        for v in range(g.n):
            if v in u2.active:
                continue
            g1 = expected_marginal_exact(g, u1.active, {v}, u1.observed, UNBOUNDED)
            g2 = expected_marginal_exact(g, u2.active, {v}, u2.observed, UNBOUNDED)
            if g1 < g2 - 1e-9:
                report.append(_describe(g, f"v={v}: gain grew from {g1} to {g2}"))
                return False, "gain grew on a later status"
        done += 1
    return True, f"{n_instances} status pairs"


def cmd_verify(args) -> int:
    if args.instances == 0:
        print("warning: --instances 0, nothing verified")
        return 0
    if args.instances < 0:
        print("adaptim: error: --instances must be nonnegative", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    battery = [
        ("estimator-agreement", _verify_estimator),
        ("greedy-bound", _verify_greedy_bound),
        ("deferred-equivalence", _verify_deferred_equivalence),
        ("concat-profit", _verify_concat),
        ("stepwise-bound", _verify_stepwise),
        ("regret-bounds", _verify_regret),
        ("gain-monotonicity", _verify_gain_monotonicity),
    ]
    failed = False
    for name, fn in battery:
        report: list[str] = []
        ok, detail = fn(rng, args.instances, report)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed = True
            for line in report:
                print(f"  offending instance: {line}")
    return 2 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd in ("trace", "sweep"):
        msg = _check_config(args)
        if msg:
            print(f"adaptim: error: {msg}", file=sys.stderr)
            return 1
        try:
            return cmd_trace(args) if args.cmd == "trace" else cmd_sweep(args)
        except GraphFormatError as exc:
            print(f"adaptim: bad graph: {exc}", file=sys.stderr)
            return 3
        except OSError as exc:
            print(f"adaptim: i/o error: {exc}", file=sys.stderr)
            return 3
    return cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
