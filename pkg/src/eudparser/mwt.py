"""Multi-word token expansion: lexicon lookups with rule fallbacks.

A token seen split in training is expanded to its most frequent split.
Unseen tokens go through language-specific rules that iteratively peel
a known prefix or suffix off the remainder. The expansion *decision* is
a plain membership test over the same lexicon and rules; it stands in
for a learned classifier and is exposed as a function so one can be
plugged in.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from .conllu import Sentence
from .errors import MwtRuleError

logger = logging.getLogger(__name__)


@dataclass
class MwtLexicon:
    counts: Counter = field(default_factory=Counter)  # (form, split) -> n

    def add(self, form: str, split: tuple[str, ...], n: int = 1):
        if len(split) < 2:
            raise ValueError("an MWT split must contain at least two words")
        self.counts[(form, split)] += n

    def lookup_exact(self, form: str) -> tuple[str, ...] | None:
        candidates = {s: n for (f, s), n in self.counts.items() if f == form}
        if not candidates:
            return None
        return min(candidates, key=lambda s: (-candidates[s], s))

    def lookup(self, form: str) -> tuple[str, ...] | None:
        """Exact match first, then lowercased with the first piece
        re-capitalized when the original was capitalized."""
        split = self.lookup_exact(form)
        if split is not None:
            return split
        lowered = self.lookup_exact(form.lower())
        if lowered is not None and form[:1].isupper():
            return (lowered[0].capitalize(),) + lowered[1:]
        return lowered

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            for (form, split), n in sorted(self.counts.items()):
                handle.write(f"{form}\t{' '.join(split)}\t{n}\n")

    @classmethod
    def load(cls, path) -> "MwtLexicon":
        lex = cls()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                form, split, n = line.split("\t")
                lex.add(form, tuple(split.split(" ")), int(n))
        return lex


def build_mwt_lexicon(sentences: list[Sentence]) -> MwtLexicon:
    """Modal split per MWT surface form observed in gold data."""
    lex = MwtLexicon()
    for sentence in sentences:
        surface = {w.id.major: w.form for w in sentence.surface_words()}
        for m in sentence.mwt_ranges:
            split = tuple(surface[i] for i in range(m.start, m.end + 1))
            lex.add(m.form, split)
    return lex


@dataclass(frozen=True)
class SplitRule:
    kind: str  # "prefix" | "suffix"
    pattern: str
    replacement: str
    min_remainder: int = 1

    def __post_init__(self):
        if self.kind not in ("prefix", "suffix"):
            raise MwtRuleError(f"unknown rule kind {self.kind!r}")
        if not self.pattern:
            raise MwtRuleError("empty rule pattern would never shorten the token")

    def peel(self, form: str) -> str | None:
        """Remainder after removing the pattern, or None if inapplicable."""
        if self.kind == "prefix":
            if form.startswith(self.pattern):
                rest = form[len(self.pattern):]
                if len(rest) >= self.min_remainder:
                    return rest
        else:
            if form.endswith(self.pattern):
                rest = form[: len(form) - len(self.pattern)]
                if len(rest) >= self.min_remainder:
                    return rest
        return None


def load_rules(path) -> list[SplitRule]:
    """One rule per line: kind<TAB>pattern<TAB>replacement<TAB>min_remainder."""
    rules = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise MwtRuleError(f"rule line {line_no}: expected 4 fields")
            kind, pattern, replacement, min_remainder = parts
            rules.append(SplitRule(kind, pattern, replacement, int(min_remainder)))
    return rules


def should_expand(
    form: str, lex: MwtLexicon, rules: list[SplitRule] = ()
) -> bool:
    """Expansion decision: known split or any applicable rule."""
    if lex.lookup(form) is not None:
        return True
    return any(rule.peel(form) is not None for rule in rules)


def expand(
    form: str, lex: MwtLexicon, rules: list[SplitRule] = ()
) -> list[str]:
    """Lexicon split when available, otherwise iterative rule peeling.

    Rules apply first-match in file order; after each peel the
    (shortened) remainder is re-scanned from the top. Guarded against
    runaway loops at |form| iterations.
    """
    split = lex.lookup(form)
    if split is not None:
        return list(split)
    front: list[str] = []
    back: list[str] = []
    remainder = form
    for _ in range(len(form) + 1):
        for rule in rules:
            rest = rule.peel(remainder)
            if rest is not None:
                if rule.kind == "prefix":
                    front.append(rule.replacement)
                else:
                    back.append(rule.replacement)
                remainder = rest
                break
        else:
            pieces = front + [remainder] + back[::-1]
            if len(pieces) == 1:
                logger.info("W:MWT no split found for token %r", form)
            return pieces
        if not remainder:
            return front + back[::-1]
    raise MwtRuleError(f"rule application did not terminate on {form!r}")


def expansion_word_f1(
    sentences: list[Sentence], lex: MwtLexicon, rules: list[SplitRule] = ()
) -> tuple[float, float, float]:
    """Word-level scores of lexicon+rule expansion against gold words.

    Tokens are the surface units of each sentence (MWT forms plus plain
    words); predicted words come from the expansion pipeline and are
    aligned to gold words by longest common subsequence.
    """
    matched = predicted_total = gold_total = 0
    for sentence in sentences:
        gold = [w.form for w in sentence.surface_words()]
        covered = {
            i for m in sentence.mwt_ranges for i in range(m.start, m.end + 1)
        }
        tokens = []
        for w in sentence.surface_words():
            if w.id.major in covered:
                continue
            tokens.append(w.form)
        for m in sentence.mwt_ranges:
            tokens.insert(m.start - 1 - sum(1 for c in covered if c < m.start), m.form)
        predicted = []
        for token in tokens:
            if should_expand(token, lex, rules):
                predicted.extend(expand(token, lex, rules))
            else:
                predicted.append(token)
        matched += _lcs_length(predicted, gold)
        predicted_total += len(predicted)
        gold_total += len(gold)
    precision = matched / predicted_total if predicted_total else 0.0
    recall = matched / gold_total if gold_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(prev[j - 1] + 1)
            else:
                current.append(max(prev[j], current[-1]))
        prev = current
    return prev[-1]
