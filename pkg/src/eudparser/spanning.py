"""Spanning-tree extraction from gold enhanced graphs.

An enhanced graph is connected, so it contains a spanning tree; the tree
parser is trained on such trees rather than on the basic layer, keeping
training targets inside the enhanced edge set. Head assignment per word:

  1. a word with a unique incoming edge keeps it;
  2. otherwise, an incoming edge from the word's basic head (matching on
     head identity, not label) is preferred;
  3. otherwise the incoming edge whose head sits closest to the root in
     the basic tree wins, ties broken by (head id, label).

The rules do not guarantee a tree, so the result is verified and an
``ExtractionError`` raised on failure; callers may skip such sentences
for tree supervision while keeping them for edge supervision.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conllu import Sentence
from .errors import BasicTreeError, ExtractionError
from .graph import CollapsedGraph, IntEdge

ROOT_DEPTH = 0


@dataclass
class SpanningTree:
    """One head per surface word; arrays are indexed by word - 1."""

    n: int
    head: list[int]
    label: list[str]

    def edges(self) -> set[IntEdge]:
        return {(self.head[j - 1], j, self.label[j - 1]) for j in range(1, self.n + 1)}

    def head_of(self, word: int) -> int:
        return self.head[word - 1]


def is_tree(n: int, head: list[int]) -> bool:
    """Tree property over head[j-1] in 0..n: acyclic and root-reachable."""
    if len(head) != n:
        return False
    for j, h in enumerate(head, start=1):
        if not 0 <= h <= n or h == j:
            return False
    for j in range(1, n + 1):
        node = j
        steps = 0
        while node != 0:
            node = head[node - 1]
            steps += 1
            if steps > n:
                return False
    return True


def compute_basic_depth(sentence: Sentence) -> list[int]:
    """Distance from the root along basic edges, per surface word.

    depth[j-1] is the number of basic edges between the root and word j
    (so a root child has depth 1). The basic heads must form a tree.
    """
    words = sentence.surface_words()
    n = len(words)
    heads = []
    for w in words:
        if w.basic_head is None:
            raise BasicTreeError(
                f"word {w.id.render()} has no basic head"
                + (f" (sentence {sentence.sent_id})" if sentence.sent_id else "")
            )
        if w.basic_head.is_empty or w.basic_head.major > n:
            raise BasicTreeError(f"invalid basic head {w.basic_head.render()}")
        heads.append(w.basic_head.major)
    depth = [0] * n
    for j in range(1, n + 1):
        node, steps = j, 0
        while node != 0:
            node = heads[node - 1]
            steps += 1
            if steps > n:
                ident = sentence.sent_id or "<unknown>"
                raise BasicTreeError(f"basic-head cycle in sentence {ident}")
        depth[j - 1] = steps
    return depth


def extract_spanning_tree(sentence: Sentence, g: CollapsedGraph) -> SpanningTree:
    """Apply the three head-assignment rules and verify the tree property."""
    n = g.n
    if n != sentence.n:
        raise ExtractionError(
            f"graph has {g.n} words but sentence has {sentence.n}"
        )
    depth = compute_basic_depth(sentence)
    basic_head = [w.basic_head.major for w in sentence.surface_words()]  # type: ignore[union-attr]

    incoming: dict[int, list[IntEdge]] = {j: [] for j in range(1, n + 1)}
    for edge in g.edges:
        incoming[edge[1]].append(edge)

    heads, labels = [], []
    for j in range(1, n + 1):
        candidates = sorted(incoming[j])
        if not candidates:
            ident = sentence.sent_id or "<unknown>"
            raise ExtractionError(f"word {j} has no incoming edge (sentence {ident})")
        if len(candidates) == 1:
            chosen = candidates[0]
        else:
            basic_matches = [e for e in candidates if e[0] == basic_head[j - 1]]
            if basic_matches:
                chosen = min(basic_matches, key=lambda e: e[2])
            else:
                def head_depth(edge: IntEdge) -> int:
                    h = edge[0]
                    return ROOT_DEPTH if h == 0 else depth[h - 1]

                chosen = min(candidates, key=lambda e: (head_depth(e), e[0], e[2]))
        heads.append(chosen[0])
        labels.append(chosen[2])

    tree = SpanningTree(n=n, head=heads, label=labels)
    if not is_tree(n, heads):
        ident = sentence.sent_id or "<unknown>"
        raise ExtractionError(f"head assignment is not a tree (sentence {ident})")
    return tree


def residual_edges(g: CollapsedGraph, tree: SpanningTree) -> set[IntEdge]:
    """Edges of ``g`` not used by the spanning tree; the tree plus these
    reconstructs ``g`` exactly."""
    return set(g.edges) - tree.edges()
