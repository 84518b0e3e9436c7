"""Relation-label de-lexicalization and the lexicon lemmatizer behind it.

Enhanced labels embed lemmas ("nmod:in" carries the lemma of a
case-marking child), which blows up the label inventory. Training
rewrites such suffixes to placeholders naming the child relation
("nmod:[case]"); after decoding, re-lexicalization looks up the
placeholder's child in the predicted graph and substitutes its lemma.
Suffixes that are grammatical subtypes rather than lemmas ("acl:relcl")
are recognized against the basic-layer subtype inventory and kept
literal. When either direction fails to find its counterpart, the
suffix is dropped and the failure counted.

Lemmas come from a lexicon extracted from training data: the relevant
words are function words with essentially unique lemmas, so a
most-frequent-lemma lookup suffices.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from .conllu import Sentence
from .graph import MERGE_DELIMITER, PATH_DELIMITER, CollapsedGraph

logger = logging.getLogger(__name__)

DEFAULT_LEXICALIZE_RELATIONS = frozenset({"case", "mark", "cc"})


@dataclass(frozen=True)
class DelexLabel:
    """A single (non-composite) label split into its rendered parts.

    Exactly one of ``placeholder`` / ``literal_suffix`` may be set;
    rendering yields "universal", "universal:literal" or
    "universal:[placeholder]".
    """

    universal: str
    placeholder: str | None = None
    literal_suffix: str | None = None

    def render(self) -> str:
        if self.placeholder is not None:
            return f"{self.universal}:[{self.placeholder}]"
        if self.literal_suffix is not None:
            return f"{self.universal}:{self.literal_suffix}"
        return self.universal

    @classmethod
    def parse(cls, text: str) -> "DelexLabel":
        universal, sep, suffix = text.partition(":")
        if not sep:
            return cls(universal=universal)
        if suffix.startswith("[") and suffix.endswith("]"):
            return cls(universal=universal, placeholder=suffix[1:-1])
        return cls(universal=universal, literal_suffix=suffix)


def universal_part(label: str) -> str:
    """Universal relation of a label atom's first path component."""
    return label.split(PATH_DELIMITER)[0].split(MERGE_DELIMITER)[0].split(":")[0]


@dataclass
class LemmaLexicon:
    """Most-frequent lemma per (form, UPOS), with a form-only fallback."""

    counts: Counter = field(default_factory=Counter)  # (form, upos, lemma) -> n

    def add(self, form: str, upos: str, lemma: str, n: int = 1):
        self.counts[(form, upos, lemma)] += n

    def _best(self, candidates: dict[str, int]) -> str | None:
        if not candidates:
            return None
        return min(candidates, key=lambda lemma: (-candidates[lemma], lemma))

    def lookup(self, form: str, upos: str | None = None) -> str | None:
        if upos is not None:
            exact = {
                lemma: n for (f, u, lemma), n in self.counts.items()
                if f == form and u == upos
            }
            best = self._best(exact)
            if best is not None:
                return best
        by_form = {}
        for (f, _, lemma), n in self.counts.items():
            if f == form:
                by_form[lemma] = by_form.get(lemma, 0) + n
        return self._best(by_form)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            for (form, upos, lemma), n in sorted(self.counts.items()):
                handle.write(f"{form}\t{upos}\t{lemma}\t{n}\n")

    @classmethod
    def load(cls, path) -> "LemmaLexicon":
        lex = cls()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                form, upos, lemma, n = line.split("\t")
                lex.add(form, upos, lemma, int(n))
        return lex


def build_lemma_lexicon(sentences: list[Sentence]) -> LemmaLexicon:
    """Count (form, UPOS) -> lemma over gold data; ties go to the
    lexicographically smaller lemma at lookup time."""
    lex = LemmaLexicon()
    for sentence in sentences:
        for word in sentence.surface_words():
            if word.lemma != "_":
                lex.add(word.form, word.upos, word.lemma)
    return lex


def harvest_subtype_inventory(sentences: list[Sentence]) -> frozenset[str]:
    """Suffixes observed in basic-layer DEPRELs; these are grammatical
    subtypes, not lemmas, and must stay literal under de-lexicalization."""
    suffixes = set()
    for sentence in sentences:
        for word in sentence.surface_words():
            if word.basic_deprel and ":" in word.basic_deprel:
                suffixes.add(word.basic_deprel.split(":", 1)[1])
    return frozenset(suffixes)


@dataclass(frozen=True)
class DelexConfig:
    lexicalize_relations: frozenset[str] = DEFAULT_LEXICALIZE_RELATIONS
    grammatical_subtypes: frozenset[str] = frozenset()


def _lemma_source_children(g: CollapsedGraph, dep: int, config: DelexConfig):
    for head, child, lbl in g.children_of(dep):
        rel = universal_part(lbl)
        if rel in config.lexicalize_relations:
            yield child, rel


def _delex_atom(
    atom: str, dep: int, sentence: Sentence, g: CollapsedGraph, config: DelexConfig
) -> tuple[str, int]:
    parsed = DelexLabel.parse(atom)
    if parsed.literal_suffix is None:
        return atom, 0
    suffix = parsed.literal_suffix
    if suffix in config.grammatical_subtypes:
        return atom, 0
    words = sentence.surface_words()
    for child, rel in sorted(_lemma_source_children(g, dep, config)):
        lemma = words[child - 1].lemma
        if lemma == suffix or lemma.lower() == suffix:
            return DelexLabel(universal=parsed.universal, placeholder=rel).render(), 0
    return parsed.universal, 1


def _map_label(label: str, mapper) -> tuple[str, int]:
    """Apply an atom mapper across merge (+) and path (>) structure."""
    failures = 0
    merged_parts = []
    for part in label.split(MERGE_DELIMITER):
        atoms = []
        for atom in part.split(PATH_DELIMITER):
            mapped, fail = mapper(atom)
            atoms.append(mapped)
            failures += fail
        merged_parts.append(PATH_DELIMITER.join(atoms))
    return MERGE_DELIMITER.join(merged_parts), failures


def delexicalize(
    sentence: Sentence, g: CollapsedGraph, config: DelexConfig = DelexConfig()
) -> tuple[CollapsedGraph, int]:
    """Rewrite lexicalized suffixes to placeholders; edge structure is
    untouched. Returns the rewritten graph and the failure count
    (suffixes stripped because no source child lemma matched)."""
    failures = 0
    edges = set()
    for head, dep, label in g.edges:
        mapped, fail = _map_label(
            label, lambda atom: _delex_atom(atom, dep, sentence, g, config)
        )
        failures += fail
        edges.add((head, dep, mapped))
    return CollapsedGraph(n=g.n, edges=frozenset(edges)), failures


def _relex_atom(
    atom: str,
    dep: int,
    sentence: Sentence,
    g: CollapsedGraph,
    lex: LemmaLexicon,
) -> tuple[str, int]:
    parsed = DelexLabel.parse(atom)
    if parsed.placeholder is None:
        return atom, 0
    rel = parsed.placeholder
    words = sentence.surface_words()
    for head, child, lbl in g.children_of(dep):
        if universal_part(lbl) == rel:
            word = words[child - 1]
            lemma = lex.lookup(word.form, word.upos)
            if lemma is None:
                lemma = word.form.lower()
            return f"{parsed.universal}:{lemma}", 0
    return parsed.universal, 1


def relexicalize(
    sentence: Sentence, g: CollapsedGraph, lex: LemmaLexicon
) -> CollapsedGraph:
    """Expand placeholders using the predicted structure and the lemma
    lexicon; placeholders with no matching child lose their suffix."""
    edges = set()
    fallbacks = 0
    for head, dep, label in g.edges:
        mapped, fail = _map_label(
            label, lambda atom: _relex_atom(atom, dep, sentence, g, lex)
        )
        fallbacks += fail
        edges.add((head, dep, mapped))
    if fallbacks:
        logger.info(
            "W:RELEX sent=%s dropped %d unresolvable placeholder(s)",
            sentence.sent_id or "?", fallbacks,
        )
    return CollapsedGraph(n=g.n, edges=frozenset(edges))
