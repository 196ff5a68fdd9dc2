"""Static lexical knowledge base (synonyms, antonyms, typed relations)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

RELATION_TAGS = ("isa", "relatedto", "not_related")
DEFAULT_NEG_PREFIXES = ("un", "im", "in", "non", "dis", "ir", "il")

# results of lookup_relation, in precedence order
RELATIONS = ("synonym", "antonym", "isa", "relatedto", "not_related", "unknown")


class KBError(ValueError):
    pass


def _norm(term: str) -> str:
    return " ".join(term.lower().split())


def _pair(a: str, b: str) -> frozenset:
    return frozenset((_norm(a), _norm(b)))


@dataclass(frozen=True)
class KnowledgeBase:
    synonyms: frozenset = frozenset()
    antonyms: frozenset = frozenset()
    relations: dict = field(default_factory=dict)
    neg_prefixes: tuple = DEFAULT_NEG_PREFIXES

    def __post_init__(self):
        clash = self.synonyms & self.antonyms
        if clash:
            a = sorted(sorted(p) for p in clash)[0]
            raise KBError(f"pair {tuple(a)} is both synonym and antonym")

    @classmethod
    def from_rows(cls, synonyms=(), antonyms=(), relations=(), neg_prefixes=DEFAULT_NEG_PREFIXES):
        rel = {}
        for a, b, tag in relations:
            if tag not in RELATION_TAGS:
                raise KBError(f"unknown relation tag {tag!r}")
            rel.setdefault((_norm(a), _norm(b)), set()).add(tag)
        return cls(
            synonyms=frozenset(_pair(a, b) for a, b in synonyms),
            antonyms=frozenset(_pair(a, b) for a, b in antonyms),
            relations={k: frozenset(v) for k, v in rel.items()},
            neg_prefixes=tuple(p.lower() for p in neg_prefixes),
        )

    def is_synonym(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.synonyms

    def is_antonym(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.antonyms

    def relation_tags(self, a: str, b: str) -> frozenset:
        """Relation tags recorded for the pair in either direction."""
        a, b = _norm(a), _norm(b)
        return self.relations.get((a, b), frozenset()) | self.relations.get((b, a), frozenset())

    def synonyms_of(self, term: str) -> list:
        """KB terms that can replace ``term`` without changing meaning (synonyms, then isa)."""
        t = _norm(term)
        out = sorted(next(iter(p - {t})) for p in self.synonyms if t in p and len(p) == 2)
        out += sorted(b for (a, b), tags in self.relations.items() if a == t and "isa" in tags)
        return out


def lookup_relation(kb: KnowledgeBase, a: str, b: str) -> str:
    if kb.is_synonym(a, b):
        return "synonym"
    if kb.is_antonym(a, b):
        return "antonym"
    a, b = _norm(a), _norm(b)
    tags = kb.relations.get((a, b)) or kb.relations.get((b, a)) or ()
    for tag in RELATION_TAGS:
        if tag in tags:
            return tag
    return "unknown"


def abbreviation(phrase) -> str:
    """Initials rule: ``["united", "state"] -> "U.S."``."""
    words = list(phrase)
    if not words:
        raise ValueError("empty phrase")
    if any(not w for w in words):
        raise ValueError("empty word in phrase")
    return "".join(w[0].upper() + "." for w in words)


def negative_prefix_differ(kb: KnowledgeBase, a: str, b: str) -> bool:
    a, b = a.lower(), b.lower()
    return any(a == p + b or b == p + a for p in kb.neg_prefixes)


# -- files --------------------------------------------------------------------

def _rows(path: Path, ncols: int):
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != ncols or any(not c.strip() for c in cols):
                raise KBError(f"{path.name}:{lineno}: expected {ncols} tab-separated columns")
            yield lineno, [c.strip() for c in cols]


def load_kb(directory) -> KnowledgeBase:
    d = Path(directory)
    syn = [tuple(c) for _, c in _rows(d / "synonyms.tsv", 2)]
    ant = [tuple(c) for _, c in _rows(d / "antonyms.tsv", 2)]
    rel = []
    for lineno, (a, b, tag) in _rows(d / "relations.tsv", 3):
        if tag.lower() not in RELATION_TAGS:
            raise KBError(f"relations.tsv:{lineno}: unknown tag {tag!r}")
        rel.append((a, b, tag.lower()))
    prefixes = DEFAULT_NEG_PREFIXES
    pfile = d / "neg_prefixes.txt"
    if pfile.exists():
        prefixes = tuple(
            ln.strip() for ln in pfile.read_text(encoding="utf-8").splitlines()
            if ln.strip() and not ln.startswith("#")
        )
    return KnowledgeBase.from_rows(syn, ant, rel, prefixes)


def save_kb(kb: KnowledgeBase, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)

    def pairs(ps):
        return sorted(tuple(sorted(p)) for p in ps)

    (d / "synonyms.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in pairs(kb.synonyms)), "utf-8")
    (d / "antonyms.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in pairs(kb.antonyms)), "utf-8")
    rows = sorted((a, b, t) for (a, b), tags in kb.relations.items() for t in tags)
    (d / "relations.tsv").write_text("".join(f"{a}\t{b}\t{t}\n" for a, b, t in rows), "utf-8")
    (d / "neg_prefixes.txt").write_text("".join(p + "\n" for p in kb.neg_prefixes), "utf-8")
