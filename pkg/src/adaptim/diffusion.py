"""Independent-cascade rounds and expected-spread evaluation.

One diffusion round gives every attempting node one chance per unobserved
out-edge to an inactive target; a sampled edge stays observed forever. An
already-observed live edge into an inactive target activates it without a
new observation (this cannot occur on process-generated statuses where live
edges always point at active nodes, but keeps hand-built statuses coherent
with reachability counting).

Expected final counts and marginal gains condition on a partial realization:
unobserved edges are integrated out, observed edges are pinned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .realization import (
    Horizon,
    Realization,
    Status,
    NotFullRealizationError,
    is_full,
    t_live_reachable,
    unobserved_edges,
)

__all__ = [
    "EnumerationCapExceeded",
    "RoundOutcome",
    "simulate_round",
    "count_active",
    "marginal_delta",
    "expected_active_exact",
    "expected_marginal_exact",
    "expected_marginal_mc",
    "enumerate_statuses",
]

ENUM_CAP_DEFAULT = 20


class EnumerationCapExceeded(RuntimeError):
    """Exact enumeration was asked to branch over too many unobserved edges."""


@dataclass(frozen=True)
class RoundOutcome:
    """Result of one diffusion round.

    newly_observed maps edge id -> True (live) / False (dead) for the edges
    sampled this round, in ascending edge-id order.
    """

    next_status: Status
    newly_active: frozenset[int]
    newly_observed: dict[int, bool]


def _boundary(g: Graph, attempting, active: frozenset[int], phi: Realization):
    """Unobserved out-edges to sample and forced activations via live edges."""
    to_sample: list[int] = []
    forced: set[int] = set()
    for u in attempting:
        for eid in g.out_edges(u):
            e = int(eid)
            v = int(g.dst[e])
            if v in active:
                continue
            if e in phi.live:
                forced.add(v)
            elif e not in phi.dead:
                to_sample.append(e)
    to_sample.sort()
    return to_sample, forced


def simulate_round(g: Graph, u: Status, frontier, rng: np.random.Generator) -> RoundOutcome:
    """Run one round in which exactly the frontier nodes attempt activations.

    Every unobserved edge from a frontier node to an inactive node is sampled
    once (in edge-id order against rng); dead edges never re-fire. An empty
    frontier is a waiting round and changes nothing.
    """
    frontier = frozenset(frontier)
    if not frontier <= u.active:
        raise ValueError("frontier must be a subset of the active set")
    to_sample, forced = _boundary(g, sorted(frontier), u.active, u.observed)
    draws = rng.random(len(to_sample))
    newly_observed: dict[int, bool] = {}
    new_live, new_dead = [], []
    activated = set(forced)
    for e, x in zip(to_sample, draws):
        live = bool(x < g.p[e])
        newly_observed[e] = live
        if live:
            new_live.append(e)
            activated.add(int(g.dst[e]))
        else:
            new_dead.append(e)
    nxt = Status(
        u.active | activated,
        Realization(u.observed.live | frozenset(new_live), u.observed.dead | frozenset(new_dead)),
    )
    return RoundOutcome(nxt, frozenset(activated), newly_observed)


def count_active(g: Graph, seeds, psi: Realization, t: Horizon) -> int:
    """Number of nodes active after t rounds when seeds start active in psi."""
    if not is_full(g, psi):
        raise NotFullRealizationError("count_active needs a full realization")
    return len(t_live_reachable(g, seeds, psi, t))


def marginal_delta(g: Graph, s, vstar, psi: Realization, t: Horizon) -> int:
    """Extra activations from additionally seeding vstar, under full psi."""
    if not is_full(g, psi):
        raise NotFullRealizationError("marginal_delta needs a full realization")
    s = frozenset(s)
    both = len(t_live_reachable(g, s | frozenset(vstar), psi, t))
    return both - len(t_live_reachable(g, s, psi, t))


def _optimistic_reach(g: Graph, sources, phi: Realization, hops: int) -> set[int]:
    """Nodes reachable via live-or-unobserved paths of at most `hops` edges."""
    reached = set(sources)
    frontier = list(reached)
    dead = phi.dead
    for _ in range(max(hops, 0)):
        if not frontier:
            break
        nxt = []
        for u in frontier:
            for eid in g.out_edges(u):
                e = int(eid)
                if e in dead:
                    continue
                v = int(g.dst[e])
                if v not in reached:
                    reached.add(v)
                    nxt.append(v)
        frontier = nxt
    return reached


def _live_reach(g: Graph, sources, phi: Realization, hops: int) -> set[int]:
    reached = set(sources)
    frontier = list(reached)
    live = phi.live
    for _ in range(max(hops, 0)):
        if not frontier:
            break
        nxt = []
        for u in frontier:
            for eid in g.out_edges(u):
                e = int(eid)
                if e in live:
                    v = int(g.dst[e])
                    if v not in reached:
                        reached.add(v)
                        nxt.append(v)
        frontier = nxt
    return reached


def _reach_cache(g: Graph) -> dict:
    cache = getattr(g, "_reach_cache", None)
    if cache is None:
        cache = {}
        g._reach_cache = cache
    return cache


def _expected_active(g, sources: frozenset, phi: Realization, t_cap: int, cache) -> float:
    """E[#nodes reachable within t_cap] over extensions of phi.

    Conditions recursively on one relevant unobserved edge at a time; an edge
    is relevant only if its source is optimistically reachable within
    t_cap - 1 hops, so unreachable parts of the graph never get branched on.
    """
    key = (sources, phi.live, phi.dead, t_cap)
    hit = cache.get(key)
    if hit is not None:
        return hit
    reach_src = _optimistic_reach(g, sources, phi, t_cap - 1) if t_cap > 0 else set()
    pick = -1
    for u in reach_src:
        for eid in g.out_edges(u):
            e = int(eid)
            if e not in phi.live and e not in phi.dead:
                if pick < 0 or e < pick:
                    pick = e
    if pick < 0:
        val = float(len(_live_reach(g, sources, phi, t_cap)))
    else:
        p = float(g.p[pick])
        live = _expected_active(
            g, sources, Realization(phi.live | {pick}, phi.dead), t_cap, cache
        )
        dead = _expected_active(
            g, sources, Realization(phi.live, phi.dead | {pick}), t_cap, cache
        )
        val = p * live + (1.0 - p) * dead
    cache[key] = val
    return val


def expected_active_exact(
    g: Graph, sources, phi: Realization, t: Horizon, cap: int = ENUM_CAP_DEFAULT
) -> float:
    """Exact E[#active after t rounds | phi] with sources already active."""
    if len(unobserved_edges(g, phi)) > cap:
        raise EnumerationCapExceeded(
            f"{len(unobserved_edges(g, phi))} unobserved edges exceed cap {cap}"
        )
    return _expected_active(g, frozenset(sources), phi, t.cap(g.n), _reach_cache(g))


def expected_marginal_exact(
    g: Graph, s, vstar, phi: Realization, t: Horizon, cap: int = ENUM_CAP_DEFAULT
) -> float:
    """Exact expected marginal gain of seeding vstar on top of s, given phi."""
    if len(unobserved_edges(g, phi)) > cap:
        raise EnumerationCapExceeded(
            f"{len(unobserved_edges(g, phi))} unobserved edges exceed cap {cap}"
        )
    s = frozenset(s)
    vs = frozenset(vstar)
    cache = _reach_cache(g)
    t_cap = t.cap(g.n)
    return _expected_active(g, s | vs, phi, t_cap, cache) - _expected_active(
        g, s, phi, t_cap, cache
    )


def expected_marginal_mc(
    g: Graph, s, vstar, phi: Realization, t: Horizon, samples: int, rng_seed: int
) -> float:
    """Monte Carlo estimate of the same marginal, sampling full extensions of phi.

    With at most 20 unobserved edges the sampled state vectors are bit-packed
    and grouped, so the estimate is the exact sample mean at any sample count.
    """
    rng = np.random.default_rng(rng_seed)
    unobs = unobserved_edges(g, phi)
    s = frozenset(s)
    vs = frozenset(vstar)
    k = len(unobs)
    if k == 0:
        psi = phi
        both = len(t_live_reachable(g, s | vs, psi, t))
        return float(both - len(t_live_reachable(g, s, psi, t)))
    probs = g.p[np.asarray(unobs)]
    draws = rng.random((samples, k)) < probs  # row = one sampled extension
    if k <= 20:
        codes = draws @ (1 << np.arange(k, dtype=np.int64))
        uniq, counts = np.unique(codes, return_counts=True)
        total = 0.0
        for code, cnt in zip(uniq, counts):
            live_extra = frozenset(unobs[i] for i in range(k) if (int(code) >> i) & 1)
            psi = Realization(
                phi.live | live_extra, phi.dead | (frozenset(unobs) - live_extra)
            )
            delta = len(t_live_reachable(g, s | vs, psi, t)) - len(
                t_live_reachable(g, s, psi, t)
            )
            total += float(cnt) * delta
        return total / samples
    total = 0.0
    for row in draws:
        live_extra = frozenset(unobs[i] for i in range(k) if row[i])
        psi = Realization(phi.live | live_extra, phi.dead | (frozenset(unobs) - live_extra))
        total += len(t_live_reachable(g, s | vs, psi, t)) - len(
            t_live_reachable(g, s, psi, t)
        )
    return total / samples


def enumerate_statuses(
    g: Graph, u: Status, rounds: int | None, cap: int = ENUM_CAP_DEFAULT
) -> list[tuple[Status, float]]:
    """All statuses reachable by running `rounds` diffusion rounds from u.

    rounds=None runs until every branch is terminated (no activation can ever
    happen again). Returns (status, probability) pairs with identical statuses
    merged; probabilities are conditionals given u and sum to 1.

    Every active node counts as attempting, which on process-generated
    statuses coincides with the usual frontier rule: older actives have no
    unobserved out-edges to inactive targets left.
    """
    current: dict[Status, float] = {u: 1.0}
    step = 0
    while True:
        if rounds is not None and step >= rounds:
            break
        nxt: dict[Status, float] = {}
        any_change = False
        for st, pr in current.items():
            to_sample, forced = _boundary(g, sorted(st.active), st.active, st.observed)
            if not to_sample and not forced:
                nxt[st] = nxt.get(st, 0.0) + pr
                continue
            any_change = True
            if len(to_sample) > cap:
                raise EnumerationCapExceeded(
                    f"round branches over {len(to_sample)} edges, cap {cap}"
                )
            for mask in range(1 << len(to_sample)):
                q = pr
                new_live, new_dead = [], []
                activated = set(forced)
                for i, e in enumerate(to_sample):
                    if (mask >> i) & 1:
                        q *= float(g.p[e])
                        new_live.append(e)
                        activated.add(int(g.dst[e]))
                    else:
                        q *= 1.0 - float(g.p[e])
                        new_dead.append(e)
                child = Status(
                    st.active | activated,
                    Realization(
                        st.observed.live | frozenset(new_live),
                        st.observed.dead | frozenset(new_dead),
                    ),
                )
                nxt[child] = nxt.get(child, 0.0) + q
        current = nxt
        step += 1
        if rounds is None and not any_change:
            break
    return list(current.items())
