"""Directed influence graphs with per-edge activation probabilities.

A graph is a fixed set of nodes 0..n-1 and a fixed list of directed edges,
each carrying the probability that the edge fires the one time its source
tries to activate its target. Edges are identified by their index in the
edge list; all other modules refer to edges by that id.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "GraphFormatError",
    "Uniform",
    "WeightedCascade",
    "FromFile",
    "ProbabilityModel",
    "load_graph",
    "save_graph",
    "random_graph",
]


class GraphFormatError(ValueError):
    """Raised when an edge-list file or an edge description is malformed."""


@dataclass(frozen=True)
class Uniform:
    """Every edge gets the same probability p in (0, 1]."""

    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise GraphFormatError(f"uniform probability must be in (0, 1], got {self.p}")


@dataclass(frozen=True)
class WeightedCascade:
    """Edge (u, v) gets probability 1 / indegree(v)."""


@dataclass(frozen=True)
class FromFile:
    """Probabilities are read from the third column of the edge list."""


ProbabilityModel = Uniform | WeightedCascade | FromFile


class Graph:
    """Immutable directed graph with probabilities and adjacency indices.

    Construction validates probabilities, drops self-loops, and collapses
    duplicate (src, dst) pairs keeping the first occurrence (a warning is
    emitted per duplicate). After construction:

      n            -- node count
      m            -- edge count
      src, dst     -- int32 arrays, endpoints per edge id
      p            -- float64 array, probability per edge id
      labels       -- original node labels (str) or None for dense graphs

    Treat all arrays as read-only.
    """

    def __init__(self, n: int, edges, probs, labels=None):
        if n <= 0:
            raise GraphFormatError("graph needs at least one node")
        seen: dict[tuple[int, int], int] = {}
        src_l, dst_l, p_l = [], [], []
        for idx, ((u, v), p) in enumerate(zip(edges, probs)):
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge {idx} endpoint out of range: ({u}, {v})")
            if u == v:
                continue
            if (u, v) in seen:
                warnings.warn(
                    f"duplicate edge ({u}, {v}); keeping the first occurrence",
                    stacklevel=2,
                )
                continue
            if not (0.0 < p <= 1.0):
                raise GraphFormatError(f"edge ({u}, {v}) probability {p} outside (0, 1]")
            seen[(u, v)] = len(src_l)
            src_l.append(u)
            dst_l.append(v)
            p_l.append(float(p))
        self.n = n
        self.m = len(src_l)
        self.src = np.asarray(src_l, dtype=np.int32)
        self.dst = np.asarray(dst_l, dtype=np.int32)
        self.p = np.asarray(p_l, dtype=np.float64)
        self.labels = list(labels) if labels is not None else None
        if self.labels is not None and len(self.labels) != n:
            raise GraphFormatError("labels length does not match node count")
        self._build_adjacency()

    def _build_adjacency(self):
        n, m = self.n, self.m
        order_out = np.argsort(self.src, kind="stable").astype(np.int32)
        order_in = np.argsort(self.dst, kind="stable").astype(np.int32)
        self.out_eids = order_out
        self.in_eids = order_in
        self.out_ptr = np.zeros(n + 1, dtype=np.int64)
        self.in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=n), out=self.out_ptr[1:])
        np.cumsum(np.bincount(self.dst, minlength=n), out=self.in_ptr[1:])
        self.out_deg = np.diff(self.out_ptr).astype(np.int64)
        self.in_deg = np.diff(self.in_ptr).astype(np.int64)

    def out_edges(self, v: int) -> np.ndarray:
        """Edge ids leaving v, ascending by edge id."""
        return self.out_eids[self.out_ptr[v] : self.out_ptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        """Edge ids entering v, ascending by edge id."""
        return self.in_eids[self.in_ptr[v] : self.in_ptr[v + 1]]

    def out_degree(self, v: int) -> int:
        return int(self.out_deg[v])

    def edge(self, eid: int) -> tuple[int, int, float]:
        return int(self.src[eid]), int(self.dst[eid]), float(self.p[eid])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and bool(np.array_equal(self.src, other.src))
            and bool(np.array_equal(self.dst, other.dst))
            and bool(np.array_equal(self.p, other.p))
            and self.labels == other.labels
        )

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def _parse_line(line: str, lineno: int) -> list[str]:
    body = line.strip()
    fields = [f.strip() for f in body.split(",")] if "," in body else body.split()
    if len(fields) not in (2, 3) or any(not f for f in fields):
        raise GraphFormatError(f"line {lineno}: expected 'src dst [prob]', got {line!r}")
    return fields


def load_graph(path, model: ProbabilityModel) -> Graph:
    """Load an edge list and attach probabilities per the given model.

    Format: one edge per line, two or three fields separated by whitespace or
    a single comma; the optional third field is the edge probability (required
    and used only when model is FromFile). Lines starting with '#' and blank
    lines are skipped. Node names may be arbitrary strings; they are remapped
    to dense ids 0..n-1 in order of first appearance and kept as labels.
    """
    raw_edges: list[tuple[int, int]] = []
    raw_probs: list[float] = []
    ids: dict[str, int] = {}
    labels: list[str] = []

    def node_id(tok: str) -> int:
        if tok not in ids:
            ids[tok] = len(labels)
            labels.append(tok)
        return ids[tok]

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = _parse_line(line, lineno)
            u, v = node_id(fields[0]), node_id(fields[1])
            if isinstance(model, FromFile):
                if len(fields) != 3:
                    raise GraphFormatError(f"line {lineno}: probability column required")
                try:
                    p = float(fields[2])
                except ValueError as exc:
                    raise GraphFormatError(f"line {lineno}: bad probability {fields[2]!r}") from exc
            else:
                p = 1.0  # placeholder, replaced below
            raw_edges.append((u, v))
            raw_probs.append(p)

    if not raw_edges:
        raise GraphFormatError(f"{path}: no edges found")
    n = len(labels)

    if isinstance(model, Uniform):
        raw_probs = [model.p] * len(raw_edges)
    elif isinstance(model, WeightedCascade):
        # 1/indegree over the deduplicated, self-loop-free edge set
        kept: dict[tuple[int, int], None] = {}
        for u, v in raw_edges:
            if u != v and (u, v) not in kept:
                kept[(u, v)] = None
        indeg = np.zeros(n, dtype=np.int64)
        for _, v in kept:
            indeg[v] += 1
        raw_probs = [1.0 / indeg[v] if u != v else 1.0 for (u, v) in raw_edges]

    return Graph(n, raw_edges, raw_probs, labels=labels)


def save_graph(g: Graph, path) -> None:
    """Write 'src dst prob' lines, using original labels when present.

    Edges are written in edge-id order, so reloading with FromFile yields an
    identical graph (labels are re-encountered in the same order).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for eid in range(g.m):
            u, v, p = g.edge(eid)
            if g.labels is not None:
                fh.write(f"{g.labels[u]} {g.labels[v]} {p!r}\n")
            else:
                fh.write(f"{u} {v} {p!r}\n")


def random_graph(n: int, m: int, p: float, rng_seed: int) -> Graph:
    """Uniform random simple digraph: m distinct ordered pairs, all edges prob p."""
    if n <= 0:
        raise GraphFormatError("need at least one node")
    total = n * (n - 1)
    if m > total:
        raise GraphFormatError(f"m={m} exceeds the {total} possible edges")
    rng = np.random.default_rng(rng_seed)
    if total <= 10**7:
        flat = rng.choice(total, size=m, replace=False)
    else:
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(int(rng.integers(total)))
        flat = np.fromiter(chosen, dtype=np.int64, count=m)
    flat = np.sort(flat)
    edges = []
    for idx in flat:
        u, off = divmod(int(idx), n - 1)
        v = off if off < u else off + 1
        edges.append((u, v))
    return Graph(n, edges, [p] * m)
