"""Reverse-reachable set sampling for marginal-gain estimation.

An RR sample picks a root uniformly among non-active nodes and grows the set
of nodes that could have activated it within the horizon, walking in-edges
backwards: observed-live edges are crossed freely, observed-dead edges are
blocked, unobserved edges are sampled once on first encounter. If the grown
set touches an already-active node the root would activate no matter what we
seed next, so the sample is recorded as covered and counts for nothing.

Seed selection scores every candidate by how many sampled sets contain it;
that count is proportional to the candidate's expected activation gain, so
the argmax is the greedy choice. The bulk counting runs in a compiled
kernel over arrays aligned with the in-edge adjacency, one counter-based
random stream per sample, so results do not depend on evaluation order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import Graph
from .realization import Horizon, Realization, unobserved_edges

__all__ = [
    "RRSet",
    "ROOT_COVERED",
    "sample_rrset",
    "sample_rrsets",
    "estimate_marginal",
    "coverage_counts",
    "greedy_select",
]

ROOT_COVERED = "root-covered"


@dataclass(frozen=True)
class RRSet:
    root: int
    nodes: frozenset[int]
    empty_reason: str | None = None


def _py_adj(g: Graph):
    """Plain-python mirrors of the in-adjacency; numpy scalar reads dominate tiny walks."""
    cached = getattr(g, "_py_adj", None)
    if cached is None:
        ins = [[int(e) for e in g.in_edges(v)] for v in range(g.n)]
        cached = (ins, [int(u) for u in g.src], [float(x) for x in g.p])
        g._py_adj = cached
    return cached


def sample_rrset(g: Graph, active, phi: Realization, t: Horizon, rng: np.random.Generator) -> RRSet:
    """Draw one RR sample conditioned on phi, rooted outside the active set."""
    n = g.n
    active = active if isinstance(active, frozenset) else frozenset(active)
    if len(active) >= n:
        raise ValueError("every node is active; nothing left to root an RR sample at")
    if 2 * len(active) >= n:
        eligible = [v for v in range(n) if v not in active]
        root = eligible[int(rng.integers(len(eligible)))]
    else:
        root = int(rng.integers(n))
        while root in active:
            root = int(rng.integers(n))
    t_cap = t.cap(n)
    live, dead = phi.live, phi.dead
    ins, src, p = _py_adj(g)
    rand = rng.random
    nodes = {root}
    frontier = deque([(root, 0)])
    while frontier:
        v, d = frontier.popleft()
        if d >= t_cap:
            continue
        for e in ins[v]:
            if e in dead:
                continue
            if e not in live and not (rand() < p[e]):
                continue
            u = src[e]
            if u in nodes:
                continue
            if u in active:
                return RRSet(root, frozenset(), ROOT_COVERED)
            nodes.add(u)
            frontier.append((u, d + 1))
    return RRSet(root, frozenset(nodes), None)


def sample_rrsets(
    g: Graph, active, phi: Realization, t: Horizon, n_samples: int, rng: np.random.Generator
) -> list[RRSet]:
    """Draw n_samples independent RR samples, distributed as sample_rrset.

    Each sample's walk decides every unobserved edge at most once, so with u
    unobserved edges a sample is a function of its root and u coin flips.
    When the (root, coin-vector) table is small we build it once and samples
    become lookups; otherwise this falls back to one walk per sample.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    active = active if isinstance(active, frozenset) else frozenset(active)
    eligible = [v for v in range(g.n) if v not in active]
    if not eligible:
        raise ValueError("every node is active; nothing left to root an RR sample at")
    ueids = sorted(unobserved_edges(g, phi))
    u = len(ueids)
    if u > 18 or len(eligible) * (1 << u) > 300_000:
        return [sample_rrset(g, active, phi, t, rng) for _ in range(n_samples)]

    t_cap = t.cap(g.n)
    ins, src, p = _py_adj(g)
    table: dict[tuple[int, int], RRSet] = {}
    for mask in range(1 << u):
        live = set(phi.live)
        live.update(e for i, e in enumerate(ueids) if mask >> i & 1)
        for root in eligible:
            nodes = {root}
            frontier = deque([(root, 0)])
            covered = False
            while frontier and not covered:
                v, d = frontier.popleft()
                if d >= t_cap:
                    continue
                for e in ins[v]:
                    if e not in live:
                        continue
                    w = src[e]
                    if w in nodes:
                        continue
                    if w in active:
                        covered = True
                        break
                    nodes.add(w)
                    frontier.append((w, d + 1))
            if covered:
                table[(root, mask)] = RRSet(root, frozenset(), ROOT_COVERED)
            else:
                table[(root, mask)] = RRSet(root, frozenset(nodes), None)

    pvec = np.array([p[e] for e in ueids], dtype=np.float64)
    weights = (1 << np.arange(u, dtype=np.int64)) if u else None
    out: list[RRSet] = []
    for start in range(0, n_samples, 1 << 18):
        chunk = min(1 << 18, n_samples - start)
        roots = rng.integers(0, len(eligible), size=chunk)
        if u:
            masks = ((rng.random((chunk, u)) < pvec) @ weights).tolist()
        else:
            masks = [0] * chunk
        out.extend(table[(eligible[r], m)] for r, m in zip(roots.tolist(), masks))
    return out


def estimate_marginal(g: Graph, active, rrsets, vstar) -> float:
    """Estimate the expected activation gain of seeding vstar from RR samples."""
    if not rrsets:
        raise ValueError("need at least one RR sample")
    active = frozenset(active)
    vs = frozenset(vstar)
    hits = sum(1 for r in rrsets if r.nodes & vs)
    return (g.n - len(active)) * hits / len(rrsets)


@njit(cache=True, nogil=True)
def _mix64(x):
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True, nogil=True)
def _coverage_kernel(
    in_ptr, src_csr, state_csr, thresh_csr, active, inactive_ids, t_cap, n_samples, seed
):
    n = in_ptr.size - 1
    golden = np.uint64(0x9E3779B97F4A7C15)
    coverage = np.zeros(n, np.int64)
    visited = np.full(n, -1, np.int32)
    dist = np.zeros(n, np.int32)
    queue = np.empty(n, np.int32)
    for s_idx in range(n_samples):
        state = _mix64(np.uint64(seed) ^ (np.uint64(s_idx) * np.uint64(0xD1342543DE82EF95)))
        state += golden
        u01 = (_mix64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        root = inactive_ids[int(u01 * inactive_ids.size)]
        tag = np.int32(s_idx)
        visited[root] = tag
        dist[root] = 0
        queue[0] = root
        head, tail = 0, 1
        covered = False
        while head < tail:
            v = queue[head]
            head += 1
            d = dist[v]
            if d >= t_cap:
                continue
            for idx in range(in_ptr[v], in_ptr[v + 1]):
                st = state_csr[idx]
                if st == 2:
                    continue
                if st == 0:
                    state += golden
                    if _mix64(state) >= thresh_csr[idx]:
                        continue
                w = src_csr[idx]
                if visited[w] == tag:
                    continue
                if active[w]:
                    covered = True
                    break
                visited[w] = tag
                dist[w] = d + 1
                queue[tail] = w
                tail += 1
            if covered:
                break
        if not covered:
            for i in range(tail):
                coverage[queue[i]] += 1
    return coverage


def _in_arrays(g: Graph):
    """CSR-position-aligned in-edge source ids and sampling thresholds, cached."""
    cached = getattr(g, "_rr_arrays", None)
    if cached is None:
        src_csr = g.src[g.in_eids].astype(np.int32)
        p_csr = g.p[g.in_eids]
        sure = p_csr >= 1.0
        thresh = (np.where(sure, 0.0, p_csr) * 18446744073709551616.0).astype(np.uint64)
        thresh[sure] = np.uint64(0xFFFFFFFFFFFFFFFF)
        cached = (src_csr, thresh)
        g._rr_arrays = cached
    return cached


def coverage_counts(
    g: Graph,
    active_mask: np.ndarray,
    observed: np.ndarray,
    t: Horizon,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Per-node RR-sample membership counts.

    active_mask is boolean per node; observed is int8 per edge id with
    0 unseen, 1 live, 2 dead. Roots are drawn among inactive nodes.
    """
    inactive_ids = np.flatnonzero(~active_mask).astype(np.int32)
    if inactive_ids.size == 0:
        raise ValueError("every node is active; no seed candidate left")
    src_csr, thresh = _in_arrays(g)
    state_csr = observed[g.in_eids]
    return _coverage_kernel(
        g.in_ptr,
        src_csr,
        state_csr,
        thresh,
        active_mask.astype(np.uint8),
        inactive_ids,
        t.cap(g.n),
        n_samples,
        np.uint64(seed),
    )


def greedy_select(
    g: Graph,
    u_active,
    phi: Realization,
    t: Horizon,
    n_samples: int,
    seed: int,
) -> int:
    """Pick the inactive node with the highest RR coverage count.

    Ties break toward the smallest node id. Raises if no node is inactive.
    """
    active = frozenset(u_active)
    active_mask = np.zeros(g.n, dtype=np.bool_)
    for v in active:
        active_mask[v] = True
    observed = np.zeros(g.m, dtype=np.int8)
    for e in phi.live:
        observed[e] = 1
    for e in phi.dead:
        observed[e] = 2
    coverage = coverage_counts(g, active_mask, observed, t, n_samples, seed)
    inactive_ids = np.flatnonzero(~active_mask)
    return int(inactive_ids[int(np.argmax(coverage[inactive_ids]))])
