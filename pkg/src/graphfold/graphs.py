"""Weighted graph construction and Laplacians.

Graphs are undirected, simple, with strictly positive edge weights. The
Laplacian is kept dense: everything downstream runs an eigendecomposition,
so at desk scale (n up to a few thousand) sparsity buys nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadRange,
    DuplicateEdge,
    NonPositiveWeight,
    SelfLoop,
    SizeZero,
    VertexOutOfRange,
)


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected simple graph with positive edge weights.

    ``edges`` is canonically ordered: each edge stored as (u, v, w) with
    u < v, sorted by (u, v).
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def build_graph(n: int, edges) -> WeightedGraph:
    """Validate an edge list and return the canonical graph.

    Raises SelfLoop, DuplicateEdge, NonPositiveWeight or VertexOutOfRange
    when the list violates the simple-graph invariants.
    """
    if n < 1:
        raise SizeZero(f"vertex count must be >= 1, got {n}")
    canonical = []
    seen = set()
    for u, v, w in edges:
        u, v, w = int(u), int(v), float(w)
        if u == v:
            raise SelfLoop(f"edge ({u},{v}) is a self loop")
        if not (0 <= u < n and 0 <= v < n):
            raise VertexOutOfRange(f"edge ({u},{v}) outside [0,{n})")
        if w <= 0:
            raise NonPositiveWeight(f"edge ({u},{v}) has weight {w}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed more than once")
        seen.add(key)
        canonical.append((key[0], key[1], w))
    canonical.sort(key=lambda e: (e[0], e[1]))
    return WeightedGraph(n=n, edges=tuple(canonical))


def complete_graph(n: int) -> WeightedGraph:
    """Complete graph on n vertices, unit weights."""
    if n < 1:
        raise SizeZero("complete graph needs n >= 1")
    edges = [(u, v, 1.0) for u in range(n) for v in range(u + 1, n)]
    return build_graph(n, edges)


def path_graph(n: int) -> WeightedGraph:
    """Path graph 0-1-2-...-(n-1), unit weights."""
    if n < 1:
        raise SizeZero("path graph needs n >= 1")
    return build_graph(n, [(i, i + 1, 1.0) for i in range(n - 1)])


def grid_graph(rows: int, cols: int) -> WeightedGraph:
    """2D lattice with 4-neighbor adjacency, unit weights.

    Vertex (r, c) has id r*cols + c (row-major).
    """
    if rows < 1 or cols < 1:
        raise SizeZero("grid needs rows, cols >= 1")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, 1.0))
            if r + 1 < rows:
                edges.append((v, v + cols, 1.0))
    return build_graph(rows * cols, edges)


def standard_topology(kind: str, *sizes: int) -> WeightedGraph:
    """Dispatch on kind in {complete, path, grid}."""
    if kind == "complete":
        return complete_graph(*sizes)
    if kind == "path":
        return path_graph(*sizes)
    if kind == "grid":
        return grid_graph(*sizes)
    raise ValueError(f"unknown topology kind {kind!r}")


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Dense weighted Laplacian L = D - A."""
    L = np.zeros((g.n, g.n))
    for u, v, w in g.edges:
        L[u, v] -= w
        L[v, u] -= w
        L[u, u] += w
        L[v, v] += w
    return L


def random_weighted_model(
    topology: WeightedGraph, lo: float, hi: float, seed: int
) -> WeightedGraph:
    """Same topology with i.i.d. uniform(lo, hi) edge weights.

    Deterministic for a fixed seed; weights are drawn in canonical edge
    order so the mapping edge -> weight is reproducible.
    """
    if not (0 < lo < hi):
        raise BadRange(f"need 0 < lo < hi, got ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(lo, hi, size=len(topology.edges))
    edges = [(u, v, float(w)) for (u, v, _), w in zip(topology.edges, weights)]
    return WeightedGraph(n=topology.n, edges=tuple(edges))


def read_edge_list(path, n: int | None = None) -> WeightedGraph:
    """Read a `u v weight` text file (0-indexed, '#' comments).

    If n is not given it is inferred as max vertex id + 1.
    """
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"expected 'u v weight', got {line!r}")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if n is None:
        n = 1 + max(max(u, v) for u, v, _ in edges)
    return build_graph(n, edges)


def write_edge_list(g: WeightedGraph, path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w!r}\n")
