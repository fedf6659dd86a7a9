"""Peer-graph generation: ring, star, grid and custom adjacency.

Node labels are 0..n-1. Labeling is fixed so configs are reproducible:
ring connects i to (i+1) mod n, the star hub defaults to node 0, grids
are numbered row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .chain import InvalidParameterError

Edge = tuple[int, int]


def _norm_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TopologySpec:
    kind: str  # ring | star | grid | custom
    n: int
    edges: tuple[Edge, ...]
    hub: Optional[int] = None
    rows: Optional[int] = None
    cols: Optional[int] = None

    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {i: [] for i in range(self.n)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return {i: sorted(peers) for i, peers in adj.items()}

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "edges": [list(e) for e in self.edges]}
        if self.hub is not None:
            d["hub"] = self.hub
        if self.rows is not None:
            d["rows"] = self.rows
            d["cols"] = self.cols
        return d

    @staticmethod
    def from_dict(d: dict) -> "TopologySpec":
        kind = d["kind"]
        if kind == "custom":
            return generate("custom", d["n"], edges=[tuple(e) for e in d["edges"]])
        return generate(kind, d["n"], hub=d.get("hub"), rows=d.get("rows"), cols=d.get("cols"))


def generate(
    kind: str,
    n: int,
    hub: Optional[int] = None,
    rows: Optional[int] = None,
    cols: Optional[int] = None,
    edges: Optional[list[Edge]] = None,
) -> TopologySpec:
    """Build a TopologySpec for one of the named kinds, or wrap custom edges."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if kind == "ring":
        if n < 3:
            raise InvalidParameterError("ring needs n >= 3")
        ring = tuple(sorted(_norm_edge(i, (i + 1) % n) for i in range(n)))
        return TopologySpec("ring", n, ring)
    if kind == "star":
        if n < 2:
            raise InvalidParameterError("star needs n >= 2")
        h = 0 if hub is None else hub
        if not 0 <= h < n:
            raise InvalidParameterError("hub out of range")
        star = tuple(sorted(_norm_edge(h, j) for j in range(n) if j != h))
        return TopologySpec("star", n, star, hub=h)
    if kind == "grid":
        if rows is None and cols is None:
            side = int(n**0.5)
            if side * side != n:
                raise InvalidParameterError("grid needs rows x cols == n")
            rows = cols = side
        if rows is None or cols is None or rows * cols != n:
            raise InvalidParameterError("grid needs rows x cols == n")
        grid = []
        for r in range(rows):
            for c in range(cols):
                i = r * cols + c
                if c + 1 < cols:
                    grid.append(_norm_edge(i, i + 1))
                if r + 1 < rows:
                    grid.append(_norm_edge(i, i + cols))
        return TopologySpec("grid", n, tuple(sorted(grid)), rows=rows, cols=cols)
    if kind == "custom":
        if edges is None:
            raise InvalidParameterError("custom topology needs edges")
        normed = tuple(sorted({_norm_edge(a, b) for a, b in edges}))
        return TopologySpec("custom", n, normed)
    raise InvalidParameterError(f"unknown topology kind: {kind}")


def validate(spec: TopologySpec) -> list[str]:
    """Structural violations as data; empty list means the spec is sound."""
    problems = []
    seen: set[Edge] = set()
    for a, b in spec.edges:
        if a == b:
            problems.append(f"self-loop at node {a}")
        if not (0 <= a < spec.n and 0 <= b < spec.n):
            problems.append(f"edge ({a}, {b}) references a node outside 0..{spec.n - 1}")
        key = _norm_edge(a, b)
        if key in seen:
            problems.append(f"duplicate edge ({key[0]}, {key[1]})")
        seen.add(key)
    if problems:
        return problems

    if spec.n > 1 and not _connected(spec):
        problems.append("graph is disconnected")

    degrees = {i: len(peers) for i, peers in spec.neighbors().items()}
    if spec.kind == "ring":
        if spec.n < 3:
            problems.append("ring needs n >= 3")
        bad = [i for i, d in degrees.items() if d != 2]
        if bad:
            problems.append(f"ring nodes without degree 2: {bad}")
    elif spec.kind == "star":
        hub = spec.hub if spec.hub is not None else 0
        if degrees.get(hub) != spec.n - 1:
            problems.append(f"star hub {hub} must have degree {spec.n - 1}")
        bad = [i for i, d in degrees.items() if i != hub and d != 1]
        if bad:
            problems.append(f"star leaves without degree 1: {bad}")
    elif spec.kind == "grid":
        if spec.rows is None or spec.cols is None or spec.rows * spec.cols != spec.n:
            problems.append("grid needs rows x cols == n")
        else:
            expected = generate("grid", spec.n, rows=spec.rows, cols=spec.cols).edges
            if tuple(sorted(spec.edges)) != expected:
                problems.append("grid edges are not the 4-neighborhood lattice")
    return problems


def _connected(spec: TopologySpec) -> bool:
    adj = spec.neighbors()
    seen = {0}
    stack = [0]
    while stack:
        for peer in adj[stack.pop()]:
            if peer not in seen:
                seen.add(peer)
                stack.append(peer)
    return len(seen) == spec.n


def average_shortest_path(spec: TopologySpec) -> Fraction:
    """Mean BFS hop distance over unordered distinct node pairs."""
    if spec.n < 2:
        raise InvalidParameterError("need at least two nodes")
    if not _connected(spec):
        raise InvalidParameterError("graph is disconnected")
    adj = spec.neighbors()
    total = 0
    for src in range(spec.n):
        dist = {src: 0}
        queue = [src]
        while queue:
            nxt = []
            for u in queue:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            queue = nxt
        total += sum(dist.values())
    # each unordered pair counted twice
    return Fraction(total, 2) / (spec.n * (spec.n - 1) // 2)
