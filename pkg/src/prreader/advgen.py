"""Synthetic reading-comprehension corpus with SEA and SDA perturbations.

Passages are short lists of templated facts ("<person> founded <org>, the
largest company of <place>, in <decade>.") and each question asks about one
fact. SEA examples swap an adjective or noun phrase for a knowledge-base
synonym; SDA examples either swap a question entity for an unseen one
(unanswerable) or append a distractor sentence with one entity swapped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .corpus import AnnotatedToken as Tok
from .corpus import Example, Span, sentence_of_span
from .embedding import EmbeddingTable
from .kb import KnowledgeBase
from .lingfeat import extract_sets, make_pairs


class GenerationError(ValueError):
    pass


# adjective -> synonym, antonym
ADJECTIVES = {
    "largest": ("biggest", "smallest"),
    "smallest": ("tiniest", "largest"),
    "oldest": ("eldest", "youngest"),
    "youngest": ("newest", "oldest"),
    "richest": ("wealthiest", "poorest"),
    "poorest": ("neediest", "richest"),
    "busiest": ("liveliest", "quietest"),
    "quietest": ("calmest", "busiest"),
}
NOUNS = {
    "company": "firm",
    "bank": "lender",
    "museum": "gallery",
    "school": "academy",
    "newspaper": "journal",
    "factory": "manufacturing plant",
    "theater": "playhouse",
    "hospital": "clinic",
    "television": "tv",
    "prize": "award",
}
VERBS = {  # past -> base
    "founded": "found",
    "acquired": "acquire",
    "built": "build",
    "sold": "sell",
    "managed": "manage",
    "funded": "fund",
    "renamed": "rename",
    "closed": "close",
}
RELATED = [("1790s", "nineties of the 18th century", "isa"), ("bank", "institution", "isa"),
           ("museum", "exhibition", "relatedto"), ("newspaper", "press", "relatedto")]
QUESTION_TYPES = ("who", "when", "where", "what")


def default_kb() -> KnowledgeBase:
    syn = [(a, s) for a, (s, _) in ADJECTIVES.items()] + list(NOUNS.items())
    ant = sorted({tuple(sorted((a, x))) for a, (_, x) in ADJECTIVES.items()})
    ant += [("possible", "impossible"), ("balanced", "unbalanced")]
    syn += [("america", "u.s."), ("prizes", "awards")]
    return KnowledgeBase.from_rows(syn, ant, RELATED)


@dataclass(frozen=True)
class GenConfig:
    n_train: int = 500
    n_test: int = 150
    sea_fraction: float = 0.2
    sda_fraction: float = 0.4
    seed: int = 0
    n_names: int = 60
    n_places: int = 60
    n_orgs: int = 60
    n_dates: int = 60
    min_facts: int = 3
    max_facts: int = 5

    def __post_init__(self):
        for f in ("sea_fraction", "sda_fraction"):
            if not 0.0 <= getattr(self, f) <= 1.0:
                raise ValueError(f"{f} must be in [0, 1]")
        if self.sea_fraction + self.sda_fraction > 1.0 + 1e-12:
            raise ValueError("sea_fraction + sda_fraction exceeds 1")
        if self.n_train < 0 or self.n_test < 0:
            raise ValueError("example counts must be non-negative")
        if not 1 <= self.min_facts <= self.max_facts:
            raise ValueError("need 1 <= min_facts <= max_facts")


# -- vocabulary -------------------------------------------------------------------

_CONS = "bcdfghjklmnprstvz"
_VOW = "aeiou"


def _pseudo_words(rng, n, syllables=(2, 3), taken=None):
    taken = set() if taken is None else taken
    out = []
    while len(out) < n:
        k = int(rng.integers(syllables[0], syllables[1] + 1))
        w = "".join(rng.choice(list(_CONS)) + rng.choice(list(_VOW)) for _ in range(k))
        w = w.capitalize()
        if w.lower() not in taken:
            taken.add(w.lower())
            out.append(w)
    return out


@dataclass(frozen=True)
class EntityPools:
    """Typed entity surface forms, each a tuple of words."""

    PERSON: tuple
    ORG: tuple
    GPE: tuple
    DATE: tuple

    def of(self, ent_type):
        return getattr(self, ent_type)


def build_pools(cfg: GenConfig):
    """Disjoint (train, test) entity pools."""
    rng = np.random.default_rng([cfg.seed, 101])
    taken = set()
    firsts = _pseudo_words(rng, cfg.n_names, (2, 2), taken)
    lasts = _pseudo_words(rng, cfg.n_names, (3, 3), taken)
    orgs = [w + "corp" if i % 3 == 0 else w for i, w in enumerate(_pseudo_words(rng, cfg.n_orgs, (2, 3), taken))]
    places = _pseudo_words(rng, cfg.n_places, (2, 3), taken)
    decades = [f"{1000 + 10 * k}s" for k in rng.permutation(100)[:cfg.n_dates]]
    halves = []
    for split in (0, 1):
        def half(xs):
            h = len(xs) // 2
            return xs[:h] if split == 0 else xs[h:]

        f, l = half(firsts), half(lasts)
        people = tuple((a, b) for a in f for b in l)
        halves.append(EntityPools(
            PERSON=people,
            ORG=tuple((o,) for o in half(orgs)),
            GPE=tuple((p,) for p in half(places)),
            DATE=tuple((d,) for d in half(decades)),
        ))
    return halves[0], halves[1]


# -- templates --------------------------------------------------------------------

def _ent(words, label, pos="NNP"):
    return [Tok(w, pos, label) for w in words]


def _fact_sentence(fact, variant):
    person = _ent(fact["person"], "PERSON")
    org = _ent(fact["org"], "ORG")
    place = _ent(fact["place"], "GPE")
    date = _ent(fact["date"], "DATE", "NNS")
    core = person + [Tok(fact["verb"], "VBD")] + org + [
        Tok(",", ","), Tok("the", "DT"), Tok(fact["adj"], "JJS"),
        *[Tok(w, "NN") for w in fact["noun"].split()], Tok("of", "IN"), *place]
    if variant == 0:
        toks = core + [Tok(",", ","), Tok("in", "IN"), *date, Tok(".", ".")]
    else:
        toks = [Tok("In", "IN"), *date, Tok(",", ",")] + core + [Tok(".", ".")]
    return toks


def _question(fact, qtype):
    """Question tokens and the entity key that answers it."""
    noun = [Tok(w, "NN") for w in fact["noun"].split()]
    desc = [Tok(",", ","), Tok("the", "DT"), Tok(fact["adj"], "JJS"), *noun]
    base = VERBS[fact["verb"]]
    person, org = _ent(fact["person"], "PERSON"), _ent(fact["org"], "ORG")
    place, date = _ent(fact["place"], "GPE"), _ent(fact["date"], "DATE", "NNS")
    if qtype == "who":
        q = [Tok("Who", "WP"), Tok(fact["verb"], "VBD"), *org, *desc, Tok("of", "IN"), *place, Tok("?", ".")]
        return q, "person"
    if qtype == "when":
        q = [Tok("When", "WRB"), Tok("did", "VBD"), *person, Tok(base, "VB"), *org, *desc,
             Tok("of", "IN"), *place, Tok("?", ".")]
        return q, "date"
    if qtype == "where":
        q = [Tok("In", "IN"), Tok("which", "WDT"), Tok("city", "NN"), Tok("did", "VBD"), *person,
             Tok(base, "VB"), *org, *desc, Tok(",", ","), Tok("in", "IN"), *date, Tok("?", ".")]
        return q, "place"
    q = [Tok("What", "WP"), Tok("did", "VBD"), *person, Tok(base, "VB"), *desc[1:],
         Tok("of", "IN"), *place, Tok("?", ".")]
    return q, "org"


def _find(tokens, words):
    words = [w.lower() for w in words]
    k = len(words)
    for i in range(len(tokens) - k + 1):
        if [t.text.lower() for t in tokens[i:i + k]] == words:
            return i
    raise GenerationError(f"{' '.join(words)!r} not found")


def _sample_fact(rng, pools, used):
    def pick(kind, attr):
        pool = pools.of(kind)
        for _ in range(100):
            v = pool[int(rng.integers(len(pool)))]
            if v not in used[attr]:
                used[attr].add(v)
                return v
        raise GenerationError(f"entity pool for {kind} exhausted")

    return {
        "person": pick("PERSON", "person"), "org": pick("ORG", "org"),
        "place": pick("GPE", "place"), "date": pick("DATE", "date"),
        "verb": str(rng.choice(sorted(VERBS))), "adj": str(rng.choice(sorted(ADJECTIVES))),
        "noun": str(rng.choice(sorted(NOUNS))),
    }


def base_example(rng, pools: EntityPools, ex_id: str, cfg: GenConfig) -> Example:
    k = int(rng.integers(cfg.min_facts, cfg.max_facts + 1))
    used = {"person": set(), "org": set(), "place": set(), "date": set()}
    facts = [_sample_fact(rng, pools, used) for _ in range(k)]
    passage, sentences = [], []
    for f in facts:
        toks = _fact_sentence(f, int(rng.integers(2)))
        sentences.append(Span(len(passage), len(passage) + len(toks)))
        passage.extend(toks)
    j = int(rng.integers(k))
    question, key = _question(facts[j], QUESTION_TYPES[int(rng.integers(len(QUESTION_TYPES)))])
    sent = sentences[j]
    start = sent.start + _find(passage[sent.start:sent.end], facts[j][key])
    answer = Span(start, start + len(facts[j][key]))
    return Example(ex_id, "original", tuple(question), tuple(passage), tuple(sentences), answer)


# -- perturbations ------------------------------------------------------------------

def _splice(tokens, span: Span, new_tokens):
    return tuple(tokens[:span.start]) + tuple(new_tokens) + tuple(tokens[span.end:])


def _replace_in_passage(e: Example, span: Span, new_tokens):
    """Replace passage tokens and remap sentence/answer spans."""
    delta = len(new_tokens) - len(span)
    passage = _splice(e.passage, span, new_tokens)

    def move(s: Optional[Span]):
        if s is None:
            return None
        if s.end <= span.start:
            return s
        if s.start >= span.end:
            return s.shift(delta)
        if s.contains(span):
            return Span(s.start, s.end + delta)
        raise GenerationError("replacement overlaps a protected span")

    return replace(e, passage=passage, sentences=tuple(move(s) for s in e.sentences),
                   answer=move(e.answer), adv_span=move(e.adv_span))


def _synonym_tokens(text, src: Tok):
    return [Tok(w, src.pos, "") for w in text.split()]


def generate_sea(e: Example, kb: KnowledgeBase, rng) -> Example:
    """Replace one adjective/adverb/noun phrase with a knowledge-base synonym."""
    if e.answer is None:
        raise GenerationError("no SEA site: example is unanswerable")
    k = sentence_of_span(e, e.answer)
    sent = e.sentences[k]
    sent_toks = e.sentence_tokens(k)
    q_words = extract_sets(e.question).words
    s_words = extract_sets(sent_toks, sent.start).words
    q_texts = {w.text.lower() for w in q_words}
    s_texts = {w.text.lower() for w in s_words}
    sites = []
    for w in q_words:
        if w.text.lower() in s_texts:
            sites += [("question", w, syn) for syn in kb.synonyms_of(w.text)]
    for w in s_words:
        overlaps_gold = w.span.start < e.answer.end and e.answer.start < w.span.end
        if w.text.lower() in q_texts and not overlaps_gold:
            sites += [("sentence", w, syn) for syn in kb.synonyms_of(w.text)]
    for idx in rng.permutation(len(sites)):
        side, item, syn = sites[int(idx)]
        if side == "question":
            new = _synonym_tokens(syn, e.question[item.span.start])
            out = replace(e, question=_splice(e.question, item.span, new))
            q_span = Span(item.span.start, item.span.start + len(new))
            target = lambda p: p.x.span == q_span  # noqa: E731
        else:
            new = _synonym_tokens(syn, e.passage[item.span.start])
            out = _replace_in_passage(e, item.span, new)
            y_span = Span(item.span.start, item.span.start + len(new))
            target = lambda p: p.y.span == y_span  # noqa: E731
        s2 = out.sentences[k]
        pairs = make_pairs(out.question, out.passage[s2.start:s2.end], kb, s2.start)
        if any(p.kind == "word" and p.mu == 1 and target(p) for p in pairs):
            return replace(out, subset="sea", adv_span=None)
    raise GenerationError("no SEA site")


def _alt_entity(rng, pool, ent_type, exclude):
    choices = [v for v in pool.of(ent_type) if tuple(w.lower() for w in v) not in exclude]
    if not choices:
        raise GenerationError(f"no alternative {ent_type} entity")
    return choices[int(rng.integers(len(choices)))]


def _passage_entities(e: Example):
    out = set()
    for k, s in enumerate(e.sentences):
        for it in extract_sets(e.sentence_tokens(k)).entities:
            out.add(tuple(it.text.lower().split()))
    return out


def _sda_unanswerable(e, rng, pool):
    ents = list(extract_sets(e.question).entities)
    if not ents:
        return None
    exclude = _passage_entities(e) | {tuple(it.text.lower().split()) for it in ents}
    item = ents[int(rng.integers(len(ents)))]
    src = e.question[item.span.start]
    alt = _alt_entity(rng, pool, item.label, exclude)
    new = [Tok(w, src.pos, item.label) for w in alt]
    return replace(e, subset="sda", question=_splice(e.question, item.span, new),
                   answer=None, adv_span=e.answer)


def _sda_distractor(e, rng, pool, kb):
    k = sentence_of_span(e, e.answer)
    sent = e.sentences[k]
    toks = list(e.sentence_tokens(k))
    gold_local = e.answer.shift(-sent.start)
    ents = [it for it in extract_sets(toks).entities
            if not (it.span.start < gold_local.end and gold_local.start < it.span.end)]
    if not ents:
        return None
    q_ents = {it.text.lower() for it in extract_sets(e.question).entities}
    shared = [it for it in ents if it.text.lower() in q_ents]
    order = [shared[int(i)] for i in rng.permutation(len(shared))]
    order += [it for it in ents if it not in shared]
    exclude = _passage_entities(e) | {tuple(t.split()) for t in q_ents}
    for item in order:
        alt = _alt_entity(rng, pool, item.label, exclude)
        src = toks[item.span.start]
        new = [Tok(w, src.pos, item.label) for w in alt]
        copy = list(_splice(toks, item.span, new))
        delta = len(new) - len(item.span)
        adv = gold_local.shift(delta) if item.span.end <= gold_local.start else gold_local
        n = len(e.passage)
        out = replace(e, subset="sda", passage=tuple(e.passage) + tuple(copy),
                      sentences=tuple(e.sentences) + (Span(n, n + len(copy)),),
                      adv_span=adv.shift(n))
        pairs = make_pairs(out.question, copy, kb, n)
        if any(p.kind == "entity" and p.mu == -1 for p in pairs) or item is order[-1]:
            return out
    return None


def generate_sda(e: Example, rng, entity_pool: EntityPools, kb: Optional[KnowledgeBase] = None) -> Example:
    """Entity-swap perturbation: unanswerable question or appended distractor."""
    if e.answer is None:
        raise GenerationError("no SDA site: example is unanswerable")
    kb = kb if kb is not None else KnowledgeBase()
    modes = [_sda_unanswerable, lambda *a: _sda_distractor(*a, kb)]
    if rng.random() < 0.5:
        modes.reverse()
    for mode in modes:
        out = mode(e, rng, entity_pool)
        if out is not None:
            return out
    raise GenerationError("no SDA site")


def synthesize_corpus(cfg: GenConfig, kb: Optional[KnowledgeBase] = None):
    """Deterministic ``(train, test)`` corpora; splits share no entity vocabulary."""
    kb = kb if kb is not None else default_kb()
    pools = build_pools(cfg)
    out = []
    for split, (name, n) in enumerate((("train", cfg.n_train), ("test", cfg.n_test))):
        rng = np.random.default_rng([cfg.seed, 200 + split])
        examples = [base_example(rng, pools[split], f"{name}-{i:05d}", cfg) for i in range(n)]
        n_sea = int(round(cfg.sea_fraction * n))
        n_sda = min(int(round(cfg.sda_fraction * n)), n - n_sea)
        order = rng.permutation(n)
        for idx in order[:n_sea]:
            examples[idx] = generate_sea(examples[idx], kb, rng)
        for idx in order[n_sea:n_sea + n_sda]:
            examples[idx] = generate_sda(examples[idx], rng, pools[split], kb)
        out.append(examples)
    return out[0], out[1]


# -- embeddings ---------------------------------------------------------------------

def synthetic_embeddings(cfg: GenConfig, dim: int = 32, seed: Optional[int] = None) -> EmbeddingTable:
    """Type-clustered vectors: same-type entities are close, synonyms nearly identical.

    Mimics the structure of pre-trained vectors, where "America" and "Canada"
    sit next to each other.
    """
    rng = np.random.default_rng([cfg.seed if seed is None else seed, 303])
    scale = 1.0 / np.sqrt(dim)
    vectors = {}

    def cluster(words, spread=0.5):
        c = rng.normal(0, scale, dim)
        for w in words:
            vectors[w.lower()] = c + rng.normal(0, spread * scale, dim)

    def near(word, base, spread=0.1):
        vectors[word.lower()] = vectors[base.lower()] + rng.normal(0, spread * scale, dim)

    train, test = build_pools(cfg)
    for kind in ("ORG", "GPE", "DATE"):
        cluster(sorted({w for p in (train, test) for v in p.of(kind) for w in v}))
    cluster(sorted({v[0] for p in (train, test) for v in p.PERSON}))
    cluster(sorted({v[1] for p in (train, test) for v in p.PERSON}))
    cluster(sorted(ADJECTIVES))
    for a, (s, _) in sorted(ADJECTIVES.items()):
        if s not in vectors:
            near(s, a)
    cluster(sorted(NOUNS))
    for n_, s in sorted(NOUNS.items()):
        for w in s.split():
            if w not in vectors:
                near(w, n_)
    cluster(sorted(VERBS))
    for past, base in sorted(VERBS.items()):
        near(base, past, 0.2)
    for w in ["who", "when", "which", "what", "where", "did", "city", "in", "of", "the", ",", ".", "?"]:
        vectors[w] = rng.normal(0, scale, dim)
    return EmbeddingTable(dim, vectors, oov_seed=cfg.seed)
