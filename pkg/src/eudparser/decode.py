"""Inference: maximum spanning arborescence plus thresholded extra edges.

The tree decoder guarantees one head per word, acyclicity and root
reachability; any extra edges rejoin nodes that are already connected,
so the assembled output is connected by construction, with no repair
pass. Multiple root children are permitted (enhanced graphs may have
several roots); a single-root variant exists behind a flag for
ablations.
"""

from __future__ import annotations

import logging

import numpy as np

from .graph import CollapsedGraph, IntEdge
from .scorer import ScoreModel, SentenceScores
from .spanning import SpanningTree, is_tree

logger = logging.getLogger(__name__)

NEG_INF = -np.inf


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    m = len(heads)
    color = [0] * m  # 0 unseen, 1 on current path, 2 finished
    color[0] = 2
    for start in range(1, m):
        if color[start]:
            continue
        path = []
        v = start
        while color[v] == 0:
            color[v] = 1
            path.append(v)
            v = int(heads[v])
        if color[v] == 1:
            return path[path.index(v):]
        for u in path:
            color[u] = 2
    return None


def _chu_liu_edmonds(scores: np.ndarray) -> np.ndarray:
    """Maximum arborescence rooted at node 0 of a dense score matrix.

    ``scores[i, j]`` is the score of attaching j under i; column 0 and
    the diagonal must already be -inf. Ties go to the smaller head
    index (argmax returns the first maximum), which makes decoding
    deterministic.
    """
    m = scores.shape[0]
    heads = np.zeros(m, dtype=np.int64)
    for j in range(1, m):
        heads[j] = int(np.argmax(scores[:, j]))
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    cycle_set = set(cycle)
    rest = [v for v in range(m) if v not in cycle_set]  # position 0 is the root
    k = len(rest)
    cycle_score = float(sum(scores[heads[v], v] for v in cycle))

    contracted = np.full((k + 1, k + 1), NEG_INF)
    contracted[:k, :k] = scores[np.ix_(rest, rest)]
    enter_node = np.zeros(k, dtype=np.int64)  # cycle node chosen when x -> cycle
    leave_node = np.zeros(k, dtype=np.int64)  # cycle node chosen when cycle -> y
    for pos, x in enumerate(rest):
        gains = np.array([scores[x, v] - scores[heads[v], v] for v in cycle])
        best = int(np.argmax(gains))
        contracted[pos, k] = gains[best] + cycle_score
        enter_node[pos] = cycle[best]
    for pos, y in enumerate(rest):
        if pos == 0:
            continue  # nothing may head the root
        vals = np.array([scores[v, y] for v in cycle])
        best = int(np.argmax(vals))
        contracted[k, pos] = vals[best]
        leave_node[pos] = cycle[best]

    sub = _chu_liu_edmonds(contracted)
    result = heads.copy()
    for pos in range(1, k):
        parent = int(sub[pos])
        result[rest[pos]] = rest[parent] if parent < k else leave_node[pos]
    cycle_parent = int(sub[k])  # a rest position; breaks the cycle there
    result[enter_node[cycle_parent]] = rest[cycle_parent]
    return result


def mst_decode(tree_scores: np.ndarray, single_root: bool = False) -> list[int]:
    """Head assignment maximizing the summed arc score.

    ``tree_scores`` is (n+1, n): rows are candidate heads 0..n, column
    j-1 is dependent j. Returns ``head[j-1]`` for each word.
    """
    tree_scores = np.asarray(tree_scores, dtype=np.float64)
    if not np.all(np.isfinite(tree_scores)):
        raise ValueError("tree scores must be finite")
    n = tree_scores.shape[1]
    if tree_scores.shape[0] != n + 1 or n < 1:
        raise ValueError(f"bad score shape {tree_scores.shape}")
    full = np.full((n + 1, n + 1), NEG_INF)
    full[:, 1:] = tree_scores
    np.fill_diagonal(full, NEG_INF)
    full[:, 0] = NEG_INF
    heads = _chu_liu_edmonds(full)

    if single_root:
        roots = [j for j in range(1, n + 1) if heads[j] == 0]
        if len(roots) > 1:
            best_heads, best_score = None, NEG_INF
            root_col = full[0].copy()
            for root in roots:
                trial = full.copy()
                trial[0, :] = NEG_INF
                trial[0, root] = root_col[root]
                cand = _chu_liu_edmonds(trial)
                score = float(sum(full[cand[j], j] for j in range(1, n + 1)))
                if score > best_score:
                    best_heads, best_score = cand, score
            heads = best_heads

    result = [int(heads[j]) for j in range(1, n + 1)]
    assert is_tree(n, result), "decoder produced a non-tree"
    return result


def edge_decode(graph_scores: np.ndarray) -> set[tuple[int, int]]:
    """Pairs whose edge probability is at least one half, i.e. score >= 0."""
    graph_scores = np.asarray(graph_scores, dtype=np.float64)
    n = graph_scores.shape[1]
    pairs = set()
    for i in range(n + 1):
        for j in range(1, n + 1):
            if i != j and graph_scores[i, j - 1] >= 0.0:
                pairs.add((i, j))
    return pairs


def label_edges(
    rel_scores: np.ndarray,
    edges: set[tuple[int, int]],
    label_vocab: list[str],
) -> set[IntEdge]:
    """Assign each edge its argmax relation label (ties: vocabulary order)."""
    labeled = set()
    for i, j in edges:
        r = int(np.argmax(rel_scores[i, j - 1]))
        labeled.add((i, j, label_vocab[r]))
    return labeled


def assemble(tree: SpanningTree, extra: set[IntEdge], sent_id: str | None = None) -> CollapsedGraph:
    """Union of tree and extra edges; connected by construction.

    When an extra edge duplicates a tree pair the tree label wins: the
    tree edge was decoded with global structure, and genuinely parallel
    relations are carried by composite labels instead.
    """
    edges = dict()
    for head, dep, label in sorted(extra):
        edges[(head, dep)] = label
    for j in range(1, tree.n + 1):
        pair = (tree.head[j - 1], j)
        if pair in edges and edges[pair] != tree.label[j - 1]:
            logger.info(
                "W:COLLIDE sent=%s pair=%s extra label %r dropped for tree label %r",
                sent_id or "?", pair, edges[pair], tree.label[j - 1],
            )
        edges[pair] = tree.label[j - 1]
    return CollapsedGraph(
        n=tree.n,
        edges=frozenset((h, d, lbl) for (h, d), lbl in edges.items()),
    )


def decode_tree_graph(
    scores: SentenceScores,
    label_vocab: list[str],
    single_root: bool = False,
    sent_id: str | None = None,
) -> tuple[CollapsedGraph, SpanningTree, set[IntEdge]]:
    """Full tree-graph decode; returns the graph plus its two ingredients."""
    heads = mst_decode(scores.tree, single_root=single_root)
    n = len(heads)
    tree_pairs = {(heads[j - 1], j) for j in range(1, n + 1)}
    tree_labeled = label_edges(scores.rel, tree_pairs, label_vocab)
    label_by_dep = {dep: lbl for _, dep, lbl in tree_labeled}
    tree = SpanningTree(n=n, head=heads, label=[label_by_dep[j] for j in range(1, n + 1)])
    extra_pairs = edge_decode(scores.graph)
    extra = label_edges(scores.rel, extra_pairs, label_vocab)
    graph = assemble(tree, extra, sent_id=sent_id)
    return graph, tree, extra


def parse_sentence(
    model: ScoreModel, words: list[str], single_root: bool = False
) -> CollapsedGraph:
    """Score, decode the arborescence, add extra edges, label, assemble."""
    scores = model.score_sentence(words)
    graph, _, _ = decode_tree_graph(scores, model.label_vocab, single_root=single_root)
    return graph
