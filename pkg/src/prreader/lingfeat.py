"""Rule-based extraction of entity/word/verb sets and question-sentence pairing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import AnnotatedToken, Span
from .kb import KnowledgeBase, abbreviation, negative_prefix_differ

DISCARD_POS = frozenset({"PDT", "POS", "PRP", "PRP$", "RP", "CD", "EX"})
CONTEXT_WINDOW = 10
MIN_CONTEXT_OVERLAP = 3

EQUIVALENT, DIFFERENT, IRRELEVANT = 1, -1, 0


@dataclass(frozen=True)
class Item:
    """An extracted entity or word; ``label`` is the entity type or pos class."""

    text: str
    span: Span
    label: str


@dataclass(frozen=True)
class LinguisticSets:
    entities: tuple
    words: tuple
    verbs: tuple  # (text, token index) in sentence order


@dataclass(frozen=True)
class FeaturePair:
    kind: str  # "entity" | "word"
    x: Item
    y: Item
    mu: int

    def __post_init__(self):
        if self.mu not in (1, -1):
            raise ValueError("mu must be +1 or -1")


def _pos_class(pos: str) -> Optional[str]:
    if pos.startswith("JJ"):
        return "adj"
    if pos.startswith("RB"):
        return "adv"
    if pos.startswith("NN"):
        return "noun_phrase"
    return None


def extract_sets(tokens: Sequence[AnnotatedToken], offset: int = 0) -> LinguisticSets:
    entities, words, verbs = [], [], []
    i, n = 0, len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.pos in DISCARD_POS:
            i += 1
            continue
        if tok.ent:
            j = i + 1
            while j < n and tokens[j].ent == tok.ent and tokens[j].pos not in DISCARD_POS:
                j += 1
            text = " ".join(t.text for t in tokens[i:j])
            entities.append(Item(text, Span(offset + i, offset + j), tok.ent))
            i = j
            continue
        if tok.pos.startswith("VB"):
            verbs.append((tok.text, offset + i))
            i += 1
            continue
        cls = _pos_class(tok.pos)
        if cls in ("adj", "adv"):
            words.append(Item(tok.text, Span(offset + i, offset + i + 1), cls))
            i += 1
            continue
        if cls == "noun_phrase":
            j = i + 1
            while (j < n and tokens[j].pos.startswith("NN") and not tokens[j].ent
                   and tokens[j].pos not in DISCARD_POS):
                j += 1
            text = " ".join(t.text for t in tokens[i:j])
            words.append(Item(text, Span(offset + i, offset + j), cls))
            i = j
            continue
        i += 1
    return LinguisticSets(tuple(entities), tuple(words), tuple(verbs))


def context_window(tokens: Sequence[AnnotatedToken], span: Span, window: int = CONTEXT_WINDOW) -> set:
    """Lowercased texts of up to ``window`` tokens on each side of ``span``."""
    if window <= 0:
        return set()
    left = tokens[max(0, span.start - window):span.start]
    right = tokens[span.end:span.end + window]
    return {t.text.lower() for t in (*left, *right)}


def judge_relation(kind: str, x: Item, y: Item, kb: KnowledgeBase,
                   x_context: set, y_context: set) -> int:
    """Return EQUIVALENT (+1), DIFFERENT (-1) or IRRELEVANT (0); first matching rule wins."""
    if x.label != y.label:
        return IRRELEVANT
    if len(x_context & y_context) < MIN_CONTEXT_OVERLAP:
        return IRRELEVANT
    a, b = x.text.lower(), y.text.lower()
    tags = kb.relation_tags(a, b)
    if a == b or kb.is_synonym(a, b) or "isa" in tags or "relatedto" in tags:
        return EQUIVALENT
    if kind == "entity":
        if (abbreviation(a.split()).lower() == b.replace(" ", "")
                or abbreviation(b.split()).lower() == a.replace(" ", "")):
            return EQUIVALENT
    if negative_prefix_differ(kb, a, b):
        return DIFFERENT
    if kb.is_antonym(a, b) or "not_related" in tags:
        return DIFFERENT
    if kind == "entity":
        return DIFFERENT
    return IRRELEVANT


def make_pairs(question: Sequence[AnnotatedToken], sentence: Sequence[AnnotatedToken],
               kb: KnowledgeBase, offset: int = 0) -> list:
    """Judged entity and word pairs between the question and one sentence.

    ``offset`` is the sentence's start in passage coordinates; pair y-spans are
    reported in those coordinates.
    """
    qs = extract_sets(question)
    ss = extract_sets(sentence, offset)
    pairs = []
    for kind, xs, ys in (("entity", qs.entities, ss.entities), ("word", qs.words, ss.words)):
        for x in xs:
            xc = context_window(question, x.span)
            for y in ys:
                local = y.span.shift(-offset)
                mu = judge_relation(kind, x, y, kb, xc, context_window(sentence, local))
                if mu != IRRELEVANT:
                    pairs.append(FeaturePair(kind, x, y, mu))
    pairs.sort(key=lambda p: (p.x.span, p.y.span, p.kind))
    return pairs


def verb_sequence(tokens: Sequence[AnnotatedToken]) -> list:
    return [text for text, _ in extract_sets(tokens).verbs]
