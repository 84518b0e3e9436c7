"""CoNLL-U reading and writing, including enhanced-graph DEPS columns.

The 10 tab-separated columns are ID, FORM, LEMMA, UPOS, XPOS, FEATS,
HEAD, DEPREL, DEPS, MISC. Three row shapes matter here:

  * multi-word token ranges, ID "i-j", underscores in HEAD/DEPREL/DEPS;
  * surface words, ID "i";
  * empty nodes, ID "i.j", no basic head.

DEPS cells hold the enhanced edges as "HEAD:LABEL|HEAD:LABEL". On
output they are emitted sorted by (head major, head minor, label), the
canonical order used by the round-trip tests. FEATS, XPOS and MISC are
carried verbatim; nothing in this toolkit interprets them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator

from .errors import ConlluParseError, ConlluSerializeError
from .graph import CollapsedGraph, Edge, EnhancedGraph, NodeId

N_COLUMNS = 10


@dataclass
class Word:
    """One word row. Empty nodes have ``id.minor > 0`` and no basic head."""

    id: NodeId
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    basic_head: NodeId | None = None
    basic_deprel: str | None = None
    misc: str = "_"

    @property
    def is_empty(self) -> bool:
        return self.id.is_empty


@dataclass
class MwtRange:
    """Multi-word token covering surface words start..end (inclusive)."""

    start: int
    end: int
    form: str
    misc: str = "_"  # kept so SpaceAfter and friends survive round trips


@dataclass
class Sentence:
    words: list[Word]
    mwt_ranges: list[MwtRange] = field(default_factory=list)
    enhanced: EnhancedGraph = None  # type: ignore[assignment]
    comments: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.enhanced is None:
            self.enhanced = EnhancedGraph(n=self.n, edges=frozenset())

    @property
    def n(self) -> int:
        """Number of surface words."""
        return sum(1 for w in self.words if not w.is_empty)

    def surface_words(self) -> list[Word]:
        return [w for w in self.words if not w.is_empty]

    def empty_nodes(self) -> list[Word]:
        return [w for w in self.words if w.is_empty]

    def word_by_id(self, node: NodeId) -> Word:
        for w in self.words:
            if w.id == node:
                return w
        raise KeyError(node)

    @property
    def sent_id(self) -> str | None:
        for comment in self.comments:
            if comment.startswith("# sent_id"):
                parts = comment.split("=", 1)
                if len(parts) == 2:
                    return parts[1].strip()
        return None

    def forms(self) -> list[str]:
        return [w.form for w in self.surface_words()]


def _parse_deps(cell: str, dep: NodeId, line_no: int) -> list[Edge]:
    if cell == "_":
        return []
    edges = []
    for item in cell.split("|"):
        head_text, sep, label = item.partition(":")
        if not sep or not label:
            raise ConlluParseError(f"malformed DEPS item {item!r}", line_no)
        try:
            head = NodeId.parse(head_text)
        except ValueError as exc:
            raise ConlluParseError(f"bad DEPS head {head_text!r}: {exc}", line_no)
        edges.append((head, dep, label))
    return edges


def _parse_word_line(cols: list[str], node: NodeId, line_no: int) -> tuple[Word, list[Edge]]:
    head_text, deprel = cols[6], cols[7]
    if node.is_empty:
        basic_head, basic_deprel = None, None
        if head_text != "_":
            raise ConlluParseError("empty node with a basic head", line_no)
    elif head_text == "_":
        # tolerated for prediction inputs that carry no basic tree
        basic_head, basic_deprel = None, None
    else:
        try:
            basic_head = NodeId.parse(head_text)
        except ValueError:
            raise ConlluParseError(f"non-numeric head {head_text!r}", line_no)
        if basic_head.is_empty:
            raise ConlluParseError(f"basic head may not be an empty node: {head_text!r}", line_no)
        basic_deprel = deprel
    word = Word(
        id=node,
        form=cols[1],
        lemma=cols[2],
        upos=cols[3],
        xpos=cols[4],
        feats=cols[5],
        basic_head=basic_head,
        basic_deprel=basic_deprel,
        misc=cols[9],
    )
    return word, _parse_deps(cols[8], node, line_no)


def _finish_sentence(
    words: list[Word],
    mwts: list[MwtRange],
    edges: list[Edge],
    comments: list[str],
    line_no: int,
) -> Sentence:
    n = sum(1 for w in words if not w.is_empty)
    majors = [w.id.major for w in words if not w.is_empty]
    if majors != list(range(1, n + 1)):
        raise ConlluParseError("surface word ids are not consecutive from 1", line_no)
    known = {w.id for w in words} | {NodeId(0)}
    for head, dep, _ in edges:
        if head not in known:
            raise ConlluParseError(f"DEPS head {head.render()} does not exist", line_no)
    for w in words:
        if w.basic_head is not None and w.basic_head not in known:
            raise ConlluParseError(f"HEAD {w.basic_head.render()} does not exist", line_no)
    empty_nodes = tuple(w.id for w in words if w.is_empty)
    graph = EnhancedGraph(n=n, edges=frozenset(edges), empty_nodes=empty_nodes)
    return Sentence(words=words, mwt_ranges=mwts, enhanced=graph, comments=comments)


def parse_conllu(source: str | IO[str]) -> list[Sentence]:
    """Parse CoNLL-U text (a string or a text stream) into sentences.

    Raises ``ConlluParseError`` with a line number for malformed input;
    arbitrary text never escapes as any other exception type.
    """
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = (line.rstrip("\n") for line in source)

    sentences = []
    words: list[Word] = []
    mwts: list[MwtRange] = []
    edges: list[Edge] = []
    comments: list[str] = []
    seen_ids: set[NodeId] = set()
    last_major = 0

    def flush(line_no: int):
        nonlocal words, mwts, edges, comments, seen_ids, last_major
        if words:
            sentences.append(_finish_sentence(words, mwts, edges, comments, line_no))
        elif comments:
            raise ConlluParseError("comments without a sentence", line_no)
        words, mwts, edges, comments = [], [], [], []
        seen_ids, last_major = set(), 0

    line_no = 0
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not line:
            flush(line_no)
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != N_COLUMNS:
            raise ConlluParseError(
                f"expected {N_COLUMNS} columns, found {len(cols)}", line_no
            )
        id_text = cols[0]
        if "-" in id_text:
            try:
                start_s, end_s = id_text.split("-", 1)
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise ConlluParseError(f"bad token range id {id_text!r}", line_no)
            if start > end:
                raise ConlluParseError(f"inverted token range {id_text!r}", line_no)
            if mwts and mwts[-1].end >= start:
                raise ConlluParseError("overlapping token ranges", line_no)
            mwts.append(MwtRange(start=start, end=end, form=cols[1], misc=cols[9]))
            continue
        try:
            node = NodeId.parse(id_text)
        except ValueError as exc:
            raise ConlluParseError(f"bad word id {id_text!r}: {exc}", line_no)
        if node in seen_ids:
            raise ConlluParseError(f"duplicate word id {id_text}", line_no)
        seen_ids.add(node)
        if not node.is_empty:
            if node.major != last_major + 1:
                raise ConlluParseError(
                    f"word id {node.major} out of order (expected {last_major + 1})",
                    line_no,
                )
            last_major = node.major
        elif node.major > last_major:
            raise ConlluParseError(
                f"empty node {id_text} precedes word {node.major}", line_no
            )
        word, word_edges = _parse_word_line(cols, node, line_no)
        words.append(word)
        edges.extend(word_edges)
    flush(line_no + 1)
    return sentences


def _deps_cell(edges: list[Edge]) -> str:
    if not edges:
        return "_"
    ordered = sorted(edges, key=lambda e: (e[0].major, e[0].minor, e[2]))
    return "|".join(f"{head.render()}:{label}" for head, _, label in ordered)


def serialize_sentence(sentence: Sentence) -> str:
    known = {w.id for w in sentence.words} | {NodeId(0)}
    deps_by_word: dict[NodeId, list[Edge]] = {w.id: [] for w in sentence.words}
    for edge in sentence.enhanced.edges:
        head, dep, _ = edge
        if head not in known or dep not in deps_by_word:
            raise ConlluSerializeError(
                f"enhanced edge {head.render()}->{dep.render()} references a missing node"
            )
        deps_by_word[dep].append(edge)

    mwt_at = {m.start: m for m in sentence.mwt_ranges}
    out = list(sentence.comments)
    for word in sorted(sentence.words, key=lambda w: w.id):
        if not word.is_empty and word.id.major in mwt_at:
            m = mwt_at[word.id.major]
            out.append(
                "\t".join(
                    [f"{m.start}-{m.end}", m.form, "_", "_", "_", "_", "_", "_", "_", m.misc]
                )
            )
        head = word.basic_head.render() if word.basic_head is not None else "_"
        deprel = word.basic_deprel if word.basic_deprel is not None else "_"
        out.append(
            "\t".join(
                [
                    word.id.render(),
                    word.form,
                    word.lemma,
                    word.upos,
                    word.xpos,
                    word.feats,
                    head,
                    deprel,
                    _deps_cell(deps_by_word[word.id]),
                    word.misc,
                ]
            )
        )
    return "\n".join(out) + "\n"


def serialize_conllu(sentences: Iterable[Sentence]) -> str:
    """Render sentences in canonical CoNLL-U form (one blank line after each)."""
    return "".join(serialize_sentence(s) + "\n" for s in sentences)


def read_file(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as handle:
        return parse_conllu(handle)


def write_file(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_conllu(sentences))


def with_enhanced(sentence: Sentence, graph: CollapsedGraph) -> Sentence:
    """Copy of ``sentence`` whose DEPS encode ``graph``; empty nodes dropped."""
    words = [replace(w) for w in sentence.surface_words()]
    edges = frozenset(
        (NodeId(h), NodeId(d), lbl) for h, d, lbl in graph.edges
    )
    enhanced = EnhancedGraph(n=graph.n, edges=edges)
    return Sentence(
        words=words,
        mwt_ranges=list(sentence.mwt_ranges),
        enhanced=enhanced,
        comments=list(sentence.comments),
    )
