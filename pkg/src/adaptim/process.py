"""Sequential seeding processes and spread estimation.

A run places k seeds one at a time. Between placements the policy gets to
watch the cascade for a while, set by the feedback schedule:

* ``Finite(d)``   - exactly d rounds run (and are recorded) after each seed.
* ``FullAdoption``- the cascade runs until it cannot activate anything more.
* ``NonAdaptive`` - all k seeds are placed before any diffusion happens.

After the last placement the cascade always runs out to termination. The
lazy variant defers the last seed: the node is chosen at the usual decision
point but only activated once the running cascade has stopped, which lets
one compare "deciding early" with "acting early".

Edge outcomes can be pinned up front (``edge_states``), so two runs that
differ only in scheduling consume identical coin flips: with an unbounded
horizon a lazy run then finishes with exactly the same active set as the
plain run, since the finally-active nodes are just the nodes reachable from
the seed set over live edges, no matter when each seed went in.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .graph import Graph
from .policy import Greedy, HighDegree, PolicyKind, Random
from .realization import Horizon, Realization, Status
from .rrset import coverage_counts

__all__ = [
    "Finite",
    "FullAdoption",
    "NonAdaptive",
    "FeedbackSchedule",
    "DiffusionTrace",
    "FEstimate",
    "run_process",
    "run_lazy_process",
    "run_replicate",
    "estimate_F",
]


@dataclass(frozen=True)
class Finite:
    """Observe exactly `rounds` diffusion rounds after each seed."""

    rounds: int

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("Finite feedback needs at least one round; use NonAdaptive for none")


@dataclass(frozen=True)
class FullAdoption:
    """Observe until the cascade cannot grow any more."""


@dataclass(frozen=True)
class NonAdaptive:
    """No feedback: every seed is chosen before diffusion starts."""


FeedbackSchedule = Union[Finite, FullAdoption, NonAdaptive]


@dataclass
class DiffusionTrace:
    """Recorded run of one process replicate.

    active_per_round[0] is the active count after the seeding that precedes
    the first diffusion round; later entries follow executed rounds. Waiting
    rounds under Finite feedback are recorded even when nothing happens, so
    traces of equal-d runs align. The last entry always equals the final
    count. seeds_in_order can be shorter than k when the graph saturates.
    """

    seeds_in_order: list[int]
    active_per_round: list[int]
    final_status: Status


@dataclass
class FEstimate:
    mean: float
    stderr: float
    round_means: list[float]


def _decide_fast(
    policy: PolicyKind,
    g: Graph,
    active_mask: np.ndarray,
    observed: np.ndarray,
    t: Horizon,
    rng: np.random.Generator,
) -> int:
    """Array-based twin of policy.decide used inside process loops."""
    inactive_ids = np.flatnonzero(~active_mask).astype(np.int32)
    if inactive_ids.size == 0:
        raise ValueError("every node is active; no seed candidate left")
    if isinstance(policy, Greedy):
        seed = int(rng.integers(1 << 63))
        coverage = coverage_counts(g, active_mask, observed, t, policy.n_samples, seed)
        return int(inactive_ids[int(np.argmax(coverage[inactive_ids]))])
    if isinstance(policy, HighDegree):
        return int(inactive_ids[int(np.argmax(g.out_deg[inactive_ids]))])
    if isinstance(policy, Random):
        return int(inactive_ids[int(rng.integers(inactive_ids.size))])
    raise TypeError(f"unknown policy {policy!r}")


class _Run:
    """Mutable cascade state for one replicate, dense-array backed."""

    def __init__(self, g: Graph, psi_live: np.ndarray, t: Horizon):
        self.g = g
        self.psi_live = psi_live
        self.active = np.zeros(g.n, dtype=np.bool_)
        self.observed = np.zeros(g.m, dtype=np.int8)  # 0 unseen, 1 live, 2 dead
        self.frontier = np.empty(0, dtype=np.int64)
        self.budget = t.rounds  # None = unlimited
        self.counts: list[int] = []
        self.seeds: list[int] = []

    def n_active(self) -> int:
        return int(self.active.sum())

    def saturated(self) -> bool:
        return bool(self.active.all())

    def seed(self, v: int) -> None:
        if self.active[v]:
            raise ValueError(f"node {v} is already active")
        self.active[v] = True
        self.seeds.append(v)
        self.frontier = np.append(self.frontier, v)

    def record(self) -> None:
        self.counts.append(self.n_active())

    def round(self) -> int:
        """Run one diffusion round; returns how many nodes it activated."""
        if self.budget is not None:
            if self.budget == 0:
                self.frontier = np.empty(0, dtype=np.int64)
                return 0
            self.budget -= 1
        f = self.frontier
        if f.size == 0:
            return 0
        g = self.g
        lens = (g.out_ptr[f + 1] - g.out_ptr[f]).astype(np.int64)
        tot = int(lens.sum())
        if tot == 0:
            self.frontier = np.empty(0, dtype=np.int64)
            return 0
        pos = np.arange(tot) + np.repeat(g.out_ptr[f].astype(np.int64) - (np.cumsum(lens) - lens), lens)
        eids = g.out_eids[pos].astype(np.int64)
        eids = eids[(self.observed[eids] == 0) & ~self.active[g.dst[eids]]]
        live = self.psi_live[eids]
        self.observed[eids] = 2
        self.observed[eids[live]] = 1
        new = np.unique(g.dst[eids[live]]).astype(np.int64)
        self.active[new] = True
        self.frontier = new
        return int(new.size)

    def run_out(self) -> None:
        """Free-run until a round activates nothing; no-op round unrecorded."""
        while self.round() > 0:
            self.record()

    def window(self, schedule: FeedbackSchedule) -> None:
        if isinstance(schedule, Finite):
            for _ in range(schedule.rounds):
                self.round()
                self.record()
        elif isinstance(schedule, FullAdoption):
            self.run_out()

    def status(self) -> Status:
        return Status(
            frozenset(int(v) for v in np.flatnonzero(self.active)),
            Realization(
                frozenset(int(e) for e in np.flatnonzero(self.observed == 1)),
                frozenset(int(e) for e in np.flatnonzero(self.observed == 2)),
            ),
        )

    def finish(self) -> DiffusionTrace:
        if not self.counts or self.counts[-1] != self.n_active():
            self.record()
        return DiffusionTrace(self.seeds, self.counts, self.status())


def _materialize(g: Graph, rng: np.random.Generator, edge_states) -> np.ndarray:
    if edge_states is not None:
        arr = np.asarray(edge_states, dtype=np.bool_)
        if arr.shape != (g.m,):
            raise ValueError(f"edge_states must have shape ({g.m},)")
        return arr
    return rng.random(g.m) < g.p


def run_process(
    g: Graph,
    policy: PolicyKind,
    k: int,
    schedule: FeedbackSchedule,
    t: Horizon,
    rng: np.random.Generator,
    edge_states=None,
) -> DiffusionTrace:
    """Run one (policy, k, schedule) replicate from the all-inactive start.

    edge_states optionally pins every edge outcome as a boolean array indexed
    by edge id; otherwise outcomes are drawn from rng up front. The horizon
    caps the total number of diffusion rounds executed.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    st = _Run(g, _materialize(g, rng, edge_states), t)
    if isinstance(schedule, NonAdaptive):
        for _ in range(k):
            if st.saturated():
                break
            st.seed(_decide_fast(policy, g, st.active, st.observed, t, rng))
        st.record()
        st.run_out()
        return st.finish()
    for i in range(k):
        if st.saturated():
            break
        st.seed(_decide_fast(policy, g, st.active, st.observed, t, rng))
        if i == 0:
            st.record()
        st.window(schedule)
    st.run_out()
    return st.finish()


def run_lazy_process(
    g: Graph,
    policy: PolicyKind,
    k: int,
    schedule: FeedbackSchedule,
    t: Horizon,
    rng: np.random.Generator,
    edge_states=None,
) -> DiffusionTrace:
    """Like run_process, but the k-th seed is chosen at the usual decision
    point and only activated after the running cascade has terminated.

    Needs feedback between seeds, so the schedule must be Finite or
    FullAdoption.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if isinstance(schedule, NonAdaptive):
        raise ValueError("lazy execution needs feedback between seeds")
    st = _Run(g, _materialize(g, rng, edge_states), t)
    for i in range(k - 1):
        if st.saturated():
            break
        st.seed(_decide_fast(policy, g, st.active, st.observed, t, rng))
        if i == 0:
            st.record()
        st.window(schedule)
    pending = None
    if not st.saturated():
        pending = _decide_fast(policy, g, st.active, st.observed, t, rng)
    if not st.counts:
        st.record()
    st.run_out()
    if pending is not None and not st.active[pending]:
        st.seed(pending)
        st.run_out()
    return st.finish()


_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_STREAM = np.uint64(0xD1342543DE82EF95)


def _hash_u01(key: np.uint64, idx: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0,1), one per index, reproducible by key."""
    x = idx.astype(np.uint64) * _STREAM
    x ^= np.uint64(key)
    x = (x ^ (x >> np.uint64(30))) * _MIX_A
    x = (x ^ (x >> np.uint64(27))) * _MIX_B
    x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def _replicate_keys(rng_seed: int, replicate: int):
    ss = np.random.SeedSequence((rng_seed, replicate))
    policy_ss, edge_ss = ss.spawn(2)
    edge_key = np.uint64(edge_ss.generate_state(1, np.uint64)[0])
    return np.random.default_rng(policy_ss), edge_key


def run_replicate(
    g: Graph,
    policy: PolicyKind,
    k: int,
    schedule: FeedbackSchedule,
    t: Horizon,
    rng_seed: int,
    replicate: int,
    lazy: bool = False,
) -> DiffusionTrace:
    """Run replicate number `replicate` of a keyed experiment.

    Edge outcomes depend only on (rng_seed, replicate, edge id), so the lazy
    and plain variants of the same replicate see the same coins.
    """
    rng, edge_key = _replicate_keys(rng_seed, replicate)
    psi_live = _hash_u01(edge_key, np.arange(g.m, dtype=np.uint64)) < g.p
    runner = run_lazy_process if lazy else run_process
    return runner(g, policy, k, schedule, t, rng, edge_states=psi_live)


def estimate_F(
    g: Graph,
    policy: PolicyKind,
    k: int,
    schedule: FeedbackSchedule,
    t: Horizon,
    n_replicates: int,
    rng_seed: int,
    lazy: bool = False,
    workers: int = 1,
) -> FEstimate:
    """Mean final spread over keyed replicates, with its standard error.

    round_means[i] averages the active count at trace position i, padding
    finished replicates with their final count. Results are independent of
    worker count: every replicate is keyed by its index.
    """
    if n_replicates < 1:
        raise ValueError("need at least one replicate")

    def one(r: int) -> DiffusionTrace:
        return run_replicate(g, policy, k, schedule, t, rng_seed, r, lazy=lazy)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, range(n_replicates)))
    else:
        traces = [one(r) for r in range(n_replicates)]
    finals = np.array([tr.active_per_round[-1] for tr in traces], dtype=np.float64)
    mean = float(finals.mean())
    stderr = float(finals.std(ddof=1) / np.sqrt(n_replicates)) if n_replicates > 1 else 0.0
    depth = max(len(tr.active_per_round) for tr in traces)
    padded = np.array(
        [tr.active_per_round + [tr.active_per_round[-1]] * (depth - len(tr.active_per_round)) for tr in traces],
        dtype=np.float64,
    )
    return FEstimate(mean, stderr, list(padded.mean(axis=0)))
