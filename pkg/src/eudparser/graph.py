"""Enhanced dependency graph data model and structural transforms.

Two graph shapes live here. ``EnhancedGraph`` is the annotation as it
appears in the DEPS column: nodes are ``NodeId``s, which include empty
nodes such as ``5.1``. ``CollapsedGraph`` is what the parser and the
evaluator operate on: empty nodes have been folded into composite path
labels, so nodes are plain integers 0..n with 0 the virtual root.

Composite label conventions:
  * path collapsing joins labels with ``>`` ("conj>nsubj"),
  * parallel-edge merging joins labels with ``+`` ("obj+xcomp"),
and collapsing is always applied before merging, so a merged label
splits on ``+`` into path components.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import GraphTransformError

logger = logging.getLogger(__name__)

PATH_DELIMITER = ">"
MERGE_DELIMITER = "+"


class NodeId(NamedTuple):
    """A CoNLL-U node identifier: word index plus empty-node sub-index.

    ``NodeId(5)`` is surface word 5, ``NodeId(5, 1)`` is the empty node
    written ``5.1``, and ``NodeId(0)`` is the virtual root. Tuple order
    gives exactly the file order of CoNLL-U rows.
    """

    major: int
    minor: int = 0

    @property
    def is_root(self) -> bool:
        return self.major == 0 and self.minor == 0

    @property
    def is_empty(self) -> bool:
        return self.minor > 0

    def render(self) -> str:
        if self.minor:
            return f"{self.major}.{self.minor}"
        return str(self.major)

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        if "." in text:
            major, minor = text.split(".", 1)
            major_i, minor_i = int(major), int(minor)
            if minor_i <= 0:
                raise ValueError(f"empty-node sub-index must be positive: {text!r}")
        else:
            major_i, minor_i = int(text), 0
        if major_i < 0:
            raise ValueError(f"negative node id: {text!r}")
        return cls(major_i, minor_i)


Edge = tuple[NodeId, NodeId, str]
IntEdge = tuple[int, int, str]

ROOT = NodeId(0)


@dataclass(frozen=True)
class EnhancedGraph:
    """Labeled directed graph over a sentence's nodes, as found in DEPS.

    ``n`` is the number of surface words; the node set is
    {root} | {1..n} | empty_nodes. Multiple heads and cycles are
    allowed; edges into the root are not.
    """

    n: int
    edges: frozenset[Edge]
    empty_nodes: tuple[NodeId, ...] = ()

    def __post_init__(self):
        for head, dep, _ in self.edges:
            if head == dep:
                raise GraphTransformError(f"self-loop on node {head.render()}")
            if dep.is_root:
                raise GraphTransformError("edge into the virtual root")

    def nodes(self) -> list[NodeId]:
        surface = [NodeId(i) for i in range(1, self.n + 1)]
        return sorted(surface + list(self.empty_nodes))

    def outgoing(self) -> dict[NodeId, list[Edge]]:
        out: dict[NodeId, list[Edge]] = {}
        for edge in sorted(self.edges):
            out.setdefault(edge[0], []).append(edge)
        return out


@dataclass(frozen=True)
class CollapsedGraph:
    """Enhanced graph with no empty nodes: node set is exactly {0, 1..n}."""

    n: int
    edges: frozenset[IntEdge] = field(default_factory=frozenset)

    def __post_init__(self):
        for head, dep, _ in self.edges:
            if head == dep:
                raise GraphTransformError(f"self-loop on node {head}")
            if dep == 0:
                raise GraphTransformError("edge into the virtual root")
            if not (0 <= head <= self.n and 1 <= dep <= self.n):
                raise GraphTransformError(
                    f"edge ({head}, {dep}) outside node range 0..{self.n}"
                )

    def nodes(self) -> list[int]:
        return list(range(1, self.n + 1))

    def heads_of(self, dep: int) -> list[IntEdge]:
        return sorted(e for e in self.edges if e[1] == dep)

    def children_of(self, head: int) -> list[IntEdge]:
        return sorted(e for e in self.edges if e[0] == head)


def check_connectivity(g: EnhancedGraph | CollapsedGraph):
    """Forward reachability from the virtual root.

    Returns ``(connected, unreachable)`` where ``unreachable`` is the set
    of nodes with no directed path from node 0. Weak connectivity is not
    enough: an enhanced graph is well-formed only if a root-origin path
    reaches every node.
    """
    if isinstance(g, CollapsedGraph):
        root = 0
        all_nodes: set = set(g.nodes())
    else:
        root = ROOT
        all_nodes = set(g.nodes())
    out: dict = {}
    for head, dep, _ in g.edges:
        out.setdefault(head, []).append(dep)
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for dep in out.get(node, ()):
            if dep not in seen:
                seen.add(dep)
                stack.append(dep)
    unreachable = all_nodes - seen
    return not unreachable, unreachable


def collapse_empty_nodes(g: EnhancedGraph) -> CollapsedGraph:
    """Fold relation paths through empty nodes into composite labels.

    Every path head -(l1)-> e1 -(l2)-> ... -(lk)-> dep whose interior
    nodes are all empty and whose endpoints are not becomes one edge
    head -(l1>...>lk)-> dep. Edges reaching an empty node with no
    continuation to a surface word are dropped (with a warning), as are
    out-edges of empty nodes that no surface head reaches.

    Raises ``GraphTransformError`` on a cycle among empty nodes, which
    would make the path set infinite.
    """
    empty = set(g.empty_nodes)
    if not empty:
        return CollapsedGraph(
            n=g.n,
            edges=frozenset((h.major, d.major, lbl) for h, d, lbl in g.edges),
        )

    out = g.outgoing()
    collapsed: set[IntEdge] = set()
    dropped = 0

    def continuations(node: NodeId, on_path: tuple[NodeId, ...]) -> list[tuple[str, int]]:
        """All (label-suffix, surface dep) pairs reachable from an empty node."""
        if node in on_path:
            raise GraphTransformError(
                f"cycle among empty nodes at {node.render()}"
            )
        results = []
        for _, dep, lbl in out.get(node, ()):
            if dep.is_empty:
                for tail, surface in continuations(dep, on_path + (node,)):
                    results.append((lbl + PATH_DELIMITER + tail, surface))
            else:
                results.append((lbl, dep.major))
        return results

    for head, dep, lbl in sorted(g.edges):
        if head.is_empty:
            continue  # consumed as path interior (or orphaned, see below)
        if not dep.is_empty:
            collapsed.add((head.major, dep.major, lbl))
            continue
        tails = continuations(dep, ())
        if not tails:
            dropped += 1
            continue
        for tail, surface in tails:
            collapsed.add((head.major, surface, lbl + PATH_DELIMITER + tail))

    if dropped:
        logger.warning("W:COLLAPSE dropped %d edge(s) into dead-end empty nodes", dropped)
    # validate empties reachable only from other empties: their out-edges vanish
    return CollapsedGraph(n=g.n, edges=frozenset(collapsed))


def merge_parallel_edges(g: CollapsedGraph) -> CollapsedGraph:
    """Replace all edges sharing (head, dep) by one ``+``-joined label.

    Labels are sorted lexicographically before joining so the merge is
    deterministic; the result has at most one edge per ordered pair.
    """
    by_pair: dict[tuple[int, int], list[str]] = {}
    for head, dep, lbl in g.edges:
        by_pair.setdefault((head, dep), []).append(lbl)
    merged = frozenset(
        (head, dep, MERGE_DELIMITER.join(sorted(labels)))
        for (head, dep), labels in by_pair.items()
    )
    return CollapsedGraph(n=g.n, edges=merged)


def split_parallel_edges(g: CollapsedGraph) -> CollapsedGraph:
    """Inverse of ``merge_parallel_edges``: split ``+``-joined labels."""
    split: set[IntEdge] = set()
    for head, dep, lbl in g.edges:
        for part in lbl.split(MERGE_DELIMITER):
            split.add((head, dep, part))
    return CollapsedGraph(n=g.n, edges=frozenset(split))


def graph_from_edges(n: int, edges: Iterable[IntEdge]) -> CollapsedGraph:
    return CollapsedGraph(n=n, edges=frozenset(edges))
