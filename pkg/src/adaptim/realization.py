"""Edge-state observations (realizations) and process statuses.

A realization records, for a subset of edges, whether each observed edge is
live (it fired) or dead (it failed). A full realization observes every edge.
A status pairs the set of currently active nodes with the realization
observed so far. Both are immutable and hashable so they can key memo tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

from .graph import Graph

__all__ = [
    "Realization",
    "Status",
    "Horizon",
    "UNBOUNDED",
    "ConflictError",
    "NotSubRealizationError",
    "NotFullRealizationError",
    "EMPTY_REALIZATION",
    "empty_status",
    "realization_prob",
    "conditional_prob",
    "is_sub",
    "is_compatible",
    "concat",
    "status_union",
    "is_full",
    "unobserved_edges",
    "t_live_reachable",
    "is_final",
    "status_text",
]


class ConflictError(ValueError):
    """Two realizations (or statuses) assign opposite states to an edge."""


class NotSubRealizationError(ValueError):
    """Conditional probability asked for a pair that is not nested."""


class NotFullRealizationError(ValueError):
    """An operation that needs every edge observed got a partial realization."""


@dataclass(frozen=True)
class Realization:
    """Observed edge states: live and dead are disjoint sets of edge ids."""

    live: frozenset[int] = frozenset()
    dead: frozenset[int] = frozenset()

    def __post_init__(self):
        overlap = self.live & self.dead
        if overlap:
            raise ConflictError(f"edges both live and dead: {sorted(overlap)}")
        if not isinstance(self.live, frozenset):
            object.__setattr__(self, "live", frozenset(self.live))
        if not isinstance(self.dead, frozenset):
            object.__setattr__(self, "dead", frozenset(self.dead))

    @property
    def observed(self) -> frozenset[int]:
        return self.live | self.dead


EMPTY_REALIZATION = Realization()


@dataclass(frozen=True)
class Status:
    """Active node set plus the realization observed so far."""

    active: frozenset[int] = frozenset()
    observed: Realization = EMPTY_REALIZATION

    def __post_init__(self):
        if not isinstance(self.active, frozenset):
            object.__setattr__(self, "active", frozenset(self.active))


def empty_status() -> Status:
    return Status()


@dataclass(frozen=True)
class Horizon:
    """Diffusion-round budget: a finite round count or no limit at all.

    On an n-node graph an unbounded horizon is equivalent to n-1 rounds
    (no simple live path is longer), which is what cap() returns.
    """

    rounds: int | None = None

    def __post_init__(self):
        if self.rounds is not None and self.rounds < 0:
            raise ValueError(f"horizon must be >= 0, got {self.rounds}")

    @property
    def unbounded(self) -> bool:
        return self.rounds is None

    @classmethod
    def finite(cls, t: int) -> "Horizon":
        return cls(int(t))

    def cap(self, n: int) -> int:
        """Effective hop bound on an n-node graph."""
        limit = n - 1
        return limit if self.rounds is None else min(self.rounds, limit)

    def minus(self, d: int) -> "Horizon":
        if self.rounds is None:
            return self
        if d > self.rounds:
            raise ValueError(f"cannot subtract {d} rounds from horizon {self.rounds}")
        return Horizon(self.rounds - d)

    def __repr__(self):
        return "Horizon(unbounded)" if self.rounds is None else f"Horizon({self.rounds})"


UNBOUNDED = Horizon(None)


def _check_edges(g: Graph, phi: Realization) -> None:
    for eid in phi.live | phi.dead:
        if not (0 <= eid < g.m):
            raise ValueError(f"edge id {eid} out of range for graph with m={g.m}")


def realization_prob(g: Graph, phi: Realization) -> float:
    """Probability of observing exactly these edge states."""
    _check_edges(g, phi)
    return prod(g.p[e] for e in phi.live) * prod(1.0 - g.p[e] for e in phi.dead)


def is_sub(phi1: Realization, phi2: Realization) -> bool:
    """True when phi2 extends phi1 (componentwise containment)."""
    return phi1.live <= phi2.live and phi1.dead <= phi2.dead


def conditional_prob(g: Graph, phi2: Realization, phi1: Realization) -> float:
    """Probability of the extension phi2 given phi1 has been observed."""
    if not is_sub(phi1, phi2):
        raise NotSubRealizationError("conditional_prob needs phi1 to be a sub-realization of phi2")
    _check_edges(g, phi2)
    return prod(g.p[e] for e in phi2.live - phi1.live) * prod(
        1.0 - g.p[e] for e in phi2.dead - phi1.dead
    )


def is_compatible(phi1: Realization, phi2: Realization) -> bool:
    """No edge is live in one and dead in the other."""
    return not (phi1.live & phi2.dead) and not (phi1.dead & phi2.live)


def concat(phi1: Realization, phi2: Realization) -> Realization:
    """Componentwise union; the least common extension of two compatible views."""
    if not is_compatible(phi1, phi2):
        bad = sorted((phi1.live & phi2.dead) | (phi1.dead & phi2.live))
        raise ConflictError(f"incompatible realizations, conflicting edges: {bad}")
    return Realization(phi1.live | phi2.live, phi1.dead | phi2.dead)


def status_union(u1: Status, u2: Status) -> Status:
    """Union of actives and observations; errors if the observations conflict."""
    return Status(u1.active | u2.active, concat(u1.observed, u2.observed))


def is_full(g: Graph, phi: Realization) -> bool:
    return len(phi.live) + len(phi.dead) == g.m


def unobserved_edges(g: Graph, phi: Realization) -> list[int]:
    """Edge ids not yet observed, ascending."""
    obs = phi.observed
    return [e for e in range(g.m) if e not in obs]


def t_live_reachable(g: Graph, sources, phi: Realization, t: Horizon) -> frozenset[int]:
    """Nodes reachable from sources via live paths of at most t edges.

    Only edges recorded live in phi are traversable; unobserved edges do not
    count. Sources are included (0-edge paths).
    """
    _check_edges(g, phi)
    cap = t.cap(g.n)
    live = phi.live
    reached = set(sources)
    frontier = list(reached)
    for _ in range(cap):
        if not frontier:
            break
        nxt = []
        for u in frontier:
            for eid in g.out_edges(u):
                if eid in live:
                    v = int(g.dst[eid])
                    if v not in reached:
                        reached.add(v)
                        nxt.append(v)
        frontier = nxt
    return frozenset(reached)


def is_final(g: Graph, u: Status) -> bool:
    """True when no super-realization can ever activate another node.

    Diffusion from the active set can escape only along an edge that is live
    or still unobserved (an unobserved edge may turn out live in some
    positive-probability extension), so the status is final exactly when
    optimistic reachability over non-dead edges stays inside the active set.
    """
    _check_edges(g, u.observed)
    dead = u.observed.dead
    for w in u.active:
        for eid in g.out_edges(w):
            if eid not in dead and int(g.dst[eid]) not in u.active:
                return False
    return True


def status_text(u: Status) -> str:
    """One-line debug form: ACTIVE: ids LIVE: eids DEAD: eids."""
    def fmt(xs):
        return ",".join(str(x) for x in sorted(xs)) if xs else "-"

    return (
        f"ACTIVE: {fmt(u.active)} LIVE: {fmt(u.observed.live)} DEAD: {fmt(u.observed.dead)}"
    )
