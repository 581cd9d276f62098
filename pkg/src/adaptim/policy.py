"""Seed-selection policies.

A policy looks at the current status and names the next node to seed. All
three pick among inactive nodes only: seeding an active node cannot change
the diffusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .graph import Graph
from .realization import Horizon, Status
from .rrset import greedy_select

__all__ = ["Greedy", "HighDegree", "Random", "PolicyKind", "decide"]


@dataclass(frozen=True)
class Greedy:
    """Maximize the estimated activation gain via RR sampling."""

    n_samples: int = 100_000


@dataclass(frozen=True)
class HighDegree:
    """Highest out-degree first, ignoring all feedback."""


@dataclass(frozen=True)
class Random:
    """Uniformly random inactive node."""


PolicyKind = Union[Greedy, HighDegree, Random]


def _inactive(g: Graph, u: Status) -> list[int]:
    nodes = [v for v in range(g.n) if v not in u.active]
    if not nodes:
        raise ValueError("every node is active; no seed candidate left")
    return nodes


def decide(policy: PolicyKind, g: Graph, u: Status, t: Horizon, rng: np.random.Generator) -> int:
    """Return the node the policy seeds next from status u."""
    if isinstance(policy, Greedy):
        seed = int(rng.integers(1 << 63))
        return greedy_select(g, u.active, u.observed, t, policy.n_samples, seed)
    if isinstance(policy, HighDegree):
        nodes = _inactive(g, u)
        return max(nodes, key=lambda v: (int(g.out_deg[v]), -v))
    if isinstance(policy, Random):
        nodes = _inactive(g, u)
        return nodes[int(rng.integers(len(nodes)))]
    raise TypeError(f"unknown policy {policy!r}")
