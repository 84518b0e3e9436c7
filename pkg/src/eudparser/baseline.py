"""Graph-only decoding with greedy connectivity repair.

The comparison system: keep the edge predictor and the relation
labeler, drop the tree decoder, and patch up any disconnected output by
repeatedly adding the highest-scoring edge from the reachable region
into an unreachable component. Trained with the full gold edge set
supervising the edge predictor (mode "graph-fix").
"""

from __future__ import annotations

from .decode import edge_decode, label_edges
from .graph import CollapsedGraph, check_connectivity
from .scorer import ScoreModel, SentenceScores


def graph_only_decode(
    model: ScoreModel, words: list[str]
) -> tuple[CollapsedGraph, SentenceScores]:
    """Thresholded edges plus labels; no connectivity guarantee."""
    scores = model.score_sentence(words)
    pairs = edge_decode(scores.graph)
    edges = label_edges(scores.rel, pairs, model.label_vocab)
    return CollapsedGraph(n=len(words), edges=frozenset(edges)), scores


def fix_connectivity(
    g: CollapsedGraph, scores: SentenceScores, label_vocab: list[str]
) -> CollapsedGraph:
    """Greedily attach unreachable components until the graph connects.

    Each round adds the single highest-scoring candidate edge from a
    reachable node (the root included) into the unreachable set, labeled
    by the relation labeler; ties break on (head, dependent). Every
    round reattaches at least one component, so this terminates after at
    most n rounds and never adds more edges than there were unreachable
    components.
    """
    edges = set(g.edges)
    while True:
        current = CollapsedGraph(n=g.n, edges=frozenset(edges))
        ok, unreachable = check_connectivity(current)
        if ok:
            return current
        reachable = {0} | (set(current.nodes()) - unreachable)
        best = None
        for i in sorted(reachable):
            for j in sorted(unreachable):
                if i == j:
                    continue
                score = scores.graph[i, j - 1]
                if best is None or score > best[0]:
                    best = (score, i, j)
        assert best is not None, "no candidate edge despite unreachable nodes"
        _, i, j = best
        (labeled,) = label_edges(scores.rel, {(i, j)}, label_vocab)
        edges.add(labeled)


def parse_graph_fix(model: ScoreModel, words: list[str]) -> CollapsedGraph:
    raw, scores = graph_only_decode(model, words)
    return fix_connectivity(raw, scores, model.label_vocab)
