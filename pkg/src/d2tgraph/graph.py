"""Unified graph data model shared by every stage of the pipeline.

Graphs are immutable. Edges are ordered pairs; an undirected connection is
stored as both orders.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class NodeKind(str, Enum):
    ENTITY = "Entity"
    RELATION = "Relation"
    CELL = "Cell"
    KEY = "Key"
    VALUE = "Value"


@dataclass(frozen=True)
class Node:
    id: int
    text: str
    kind: NodeKind

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"node id must be non-negative, got {self.id}")
        if not self.text.strip():
            raise ValueError(f"node {self.id}: text is empty")
        object.__setattr__(self, "kind", NodeKind(self.kind))


@dataclass(frozen=True)
class UnifiedGraph:
    nodes: tuple[Node, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    directed_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))

    def __len__(self):
        return len(self.nodes)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "text": n.text, "kind": n.kind.value} for n in self.nodes],
            "edges": [list(e) for e in self.sorted_edges()],
            "directed_only": self.directed_only,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> UnifiedGraph:
        nodes = [Node(int(n["id"]), n["text"], NodeKind(n["kind"])) for n in d["nodes"]]
        edges = frozenset((int(a), int(b)) for a, b in d["edges"])
        return cls(tuple(nodes), edges, bool(d.get("directed_only", False)))

    @classmethod
    def from_json(cls, s: str | bytes) -> UnifiedGraph:
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"  # or "warning"


def validate_graph(g: UnifiedGraph) -> list[Violation]:
    """Return every invariant violation in ``g``; an empty list means valid.

    Disconnection is reported with severity ``"warning"``.
    """
    report: list[Violation] = []
    n = len(g.nodes)
    for pos, node in enumerate(g.nodes):
        if node.id != pos:
            report.append(Violation("node-id", f"node at position {pos} has id {node.id}"))
    for a, b in g.sorted_edges():
        if not (0 <= a < n and 0 <= b < n):
            report.append(Violation("dangling", f"dangling endpoint in edge ({a},{b})"))
        elif a == b:
            report.append(Violation("self-loop", f"self-loop ({a},{a})"))
        elif not g.directed_only and (b, a) not in g.edges:
            report.append(Violation("asymmetry", f"missing reverse edge ({b},{a})"))
    # frozenset cannot hold duplicates; the check matters only for raw edge lists
    if n > 1 and not _is_connected(g):
        report.append(Violation("disconnected", "graph has more than one component", "warning"))
    return report


def errors_only(report: list[Violation]) -> list[Violation]:
    return [v for v in report if v.severity == "error"]


def _is_connected(g: UnifiedGraph) -> bool:
    n = len(g.nodes)
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in g.edges:
        if 0 <= a < n and 0 <= b < n:
            adj[a].add(b)
            adj[b].add(a)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for u in adj[v] - seen:
            seen.add(u)
            queue.append(u)
    return len(seen) == n


def add_reverse_edges(g: UnifiedGraph) -> UnifiedGraph:
    edges = set(g.edges)
    edges |= {(b, a) for a, b in g.edges}
    return UnifiedGraph(g.nodes, frozenset(edges), directed_only=False)


def neighbors(g: UnifiedGraph, v: int) -> list[int]:
    """Out-neighbours of ``v`` in ascending index order."""
    if not 0 <= v < len(g.nodes):
        raise IndexError(f"node out of range: {v}")
    return sorted(b for a, b in g.edges if a == v)


def build_graph(texts_kinds, edges, directed_only=False) -> UnifiedGraph:
    """Convenience constructor from ``[(text, kind), ...]`` and an edge iterable.

    Duplicate edges collapse silently; self-loops and out-of-range endpoints
    raise ``ValueError``.
    """
    nodes = tuple(Node(i, t, NodeKind(k)) for i, (t, k) in enumerate(texts_kinds))
    es = set()
    for a, b in edges:
        if a == b:
            raise ValueError(f"self-loop ({a},{b})")
        if not (0 <= a < len(nodes) and 0 <= b < len(nodes)):
            raise ValueError(f"dangling endpoint in edge ({a},{b})")
        es.add((a, b))
    return UnifiedGraph(nodes, frozenset(es), directed_only)
