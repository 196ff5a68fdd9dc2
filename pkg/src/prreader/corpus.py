"""Annotated reading-comprehension examples: data model, I/O and candidates."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

SUBSETS = ("original", "sda", "sea")


class CorpusError(ValueError):
    """Raised for malformed or invalid corpus input."""


@dataclass(frozen=True)
class AnnotatedToken:
    text: str
    pos: str
    ent: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text is empty")
        if not self.pos:
            raise ValueError("token pos is empty")


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token range ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0:
            raise ValueError("negative span start")
        if self.end <= self.start:
            raise ValueError("empty span")

    def __len__(self):
        return self.end - self.start

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def shift(self, delta: int) -> "Span":
        return Span(self.start + delta, self.end + delta)

    def to_list(self):
        return [self.start, self.end]


@dataclass(frozen=True)
class Example:
    id: str
    subset: str
    question: tuple
    passage: tuple
    sentences: tuple
    answer: Optional[Span] = None
    # Answer-like span inside the adversarially altered region (SDA only);
    # used to build negative constraint targets.
    adv_span: Optional[Span] = None

    @property
    def answerable(self) -> bool:
        return self.answer is not None

    def sentence_tokens(self, index: int) -> tuple:
        s = self.sentences[index]
        return self.passage[s.start:s.end]

    def span_texts(self, span: Optional[Span]) -> list:
        if span is None:
            return []
        return [t.text for t in self.passage[span.start:span.end]]


@dataclass(frozen=True)
class Candidate:
    kind: str
    span: Optional[Span] = None
    sentence_index: Optional[int] = None

    @property
    def is_span(self) -> bool:
        return self.kind == "span"


NO_ANSWER = Candidate("no_answer")


def validate_example(e: Example) -> list:
    """Return the list of violated invariants (empty when the example is valid)."""
    problems = []
    if e.subset not in SUBSETS:
        problems.append(f"unknown subset {e.subset!r}")
    if not e.question:
        problems.append("empty question")
    if not e.passage:
        problems.append("empty passage")
    n = len(e.passage)
    expected = 0
    for s in e.sentences:
        if s.start < expected:
            problems.append("overlapping sentences")
        elif s.start > expected:
            problems.append("sentences do not cover passage")
        expected = max(expected, s.end)
    if expected < n or not e.sentences:
        problems.append("sentences do not cover passage")
    elif expected > n:
        problems.append("sentence exceeds passage")
    for name, span in (("answer", e.answer), ("adv_span", e.adv_span)):
        if span is None:
            continue
        if span.end > n:
            problems.append(f"{name} outside passage")
        elif not any(s.contains(span) for s in e.sentences):
            problems.append(f"{name} crosses sentence boundary")
    # keep order, drop duplicates
    return list(dict.fromkeys(problems))


def sentence_of_span(e: Example, s: Span) -> int:
    starts = [x.start for x in e.sentences]
    i = bisect.bisect_right(starts, s.start) - 1
    if i < 0 or not e.sentences[i].contains(s):
        raise CorpusError("span not within one sentence")
    return i


def candidate_spans(e: Example, max_len: int) -> list:
    """All within-sentence spans of length <= ``max_len`` plus a trailing no-answer slot."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out = []
    for k, sent in enumerate(e.sentences):
        for i in range(sent.start, sent.end):
            for j in range(i + 1, min(i + max_len, sent.end) + 1):
                out.append(Candidate("span", Span(i, j), k))
    out.append(NO_ANSWER)
    return out


def gold_index(candidates: Sequence[Candidate], e: Example) -> Optional[int]:
    """Index of the gold candidate, or None when the gold span is not enumerable."""
    if e.answer is None:
        return len(candidates) - 1 if not candidates[-1].is_span else None
    for i, c in enumerate(candidates):
        if c.is_span and c.span == e.answer:
            return i
    return None


# -- serialization ----------------------------------------------------------

def _tokens_from_json(items) -> tuple:
    return tuple(AnnotatedToken(d["t"], d["pos"], d.get("ent", "")) for d in items)


def _span_from_json(obj) -> Optional[Span]:
    if obj is None:
        return None
    if isinstance(obj, dict):
        return Span(int(obj["start"]), int(obj["end"]))
    start, end = obj
    return Span(int(start), int(end))


def example_from_dict(d: dict) -> Example:
    return Example(
        id=str(d["id"]),
        subset=d["subset"],
        question=_tokens_from_json(d["question"]),
        passage=_tokens_from_json(d["passage"]),
        sentences=tuple(_span_from_json(s) for s in d["sentences"]),
        answer=_span_from_json(d.get("answer")),
        adv_span=_span_from_json(d.get("adv_span")),
    )


def example_to_dict(e: Example) -> dict:
    tok = lambda t: {"t": t.text, "pos": t.pos, "ent": t.ent}  # noqa: E731
    d = {
        "id": e.id,
        "subset": e.subset,
        "question": [tok(t) for t in e.question],
        "passage": [tok(t) for t in e.passage],
        "sentences": [s.to_list() for s in e.sentences],
        "answer": None if e.answer is None else {"start": e.answer.start, "end": e.answer.end},
    }
    if e.adv_span is not None:
        d["adv_span"] = e.adv_span.to_list()
    return d


def load_corpus(path) -> list:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                e = example_from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            problems = validate_example(e)
            if problems:
                raise CorpusError(f"{path}:{lineno}: example {e.id}: {'; '.join(problems)}")
            examples.append(e)
    return examples


def dump_corpus(examples: Iterable[Example], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for e in examples:
            fh.write(json.dumps(example_to_dict(e), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
