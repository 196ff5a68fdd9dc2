from hypothesis import given, strategies as st

from prreader.corpus import AnnotatedToken, Span
from prreader.kb import KnowledgeBase
from prreader.lingfeat import (DIFFERENT, EQUIVALENT, IRRELEVANT, Item, context_window,
                               extract_sets, judge_relation, make_pairs, verb_sequence)

from conftest import toks

EMPTY = KnowledgeBase.from_rows()
SHARED = {"built", "the", "tower", "in"}


def test_noun_merge():
    s = extract_sets(toks("train/NN station/NN"))
    assert [(w.text, w.label) for w in s.words] == [("train station", "noun_phrase")]


def test_discarded_pronoun():
    s = extract_sets(toks("he/PRP"))
    assert not s.entities and not s.words and not s.verbs


def test_sentence_extraction():
    s = extract_sets(toks("New/NNP/GPE York/NNP/GPE is/VBZ the/DT largest/JJS city/NN"), offset=10)
    assert [(e.text, e.span) for e in s.entities] == [("New York", Span(10, 12))]
    assert s.verbs == (("is", 12),)
    assert [(w.text, w.label) for w in s.words] == [("largest", "adj"), ("city", "noun_phrase")]


def test_context_window():
    t = toks("a/DT b/NN c/NN d/NN e/NN")
    assert context_window(t, Span(2, 3)) == {"a", "b", "d", "e"}
    assert context_window(t, Span(0, 1)) == {"b", "c", "d", "e"}
    assert context_window(t, Span(2, 3), window=0) == set()
    assert context_window(t, Span(2, 3), window=1) == {"b", "d"}


def test_pos_class_mismatch_is_irrelevant():
    x = Item("hot", Span(0, 1), "adj")
    y = Item("city", Span(0, 1), "noun_phrase")
    assert judge_relation("word", x, y, EMPTY, SHARED, SHARED) == IRRELEVANT


def test_type_mismatch_is_irrelevant():
    x = Item("1949", Span(0, 1), "DATE")
    y = Item("America", Span(0, 1), "GPE")
    assert judge_relation("entity", x, y, EMPTY, SHARED, SHARED) == IRRELEVANT


def test_abbreviation_equivalent():
    x = Item("United State", Span(0, 2), "GPE")
    y = Item("U.S.", Span(0, 1), "GPE")
    assert judge_relation("entity", x, y, EMPTY, SHARED, SHARED) == EQUIVALENT
    assert judge_relation("entity", y, x, EMPTY, SHARED, SHARED) == EQUIVALENT


def test_negative_prefix_different():
    for a, b in (("unbalanced", "balanced"), ("possible", "impossible")):
        x, y = Item(a, Span(0, 1), "adj"), Item(b, Span(0, 1), "adj")
        assert judge_relation("word", x, y, EMPTY, SHARED, SHARED) == DIFFERENT


def test_entity_default_different():
    x, y = Item("America", Span(0, 1), "GPE"), Item("Canada", Span(0, 1), "GPE")
    assert judge_relation("entity", x, y, EMPTY, SHARED, SHARED) == DIFFERENT
    # words have no default rule
    x, y = Item("red", Span(0, 1), "adj"), Item("quick", Span(0, 1), "adj")
    assert judge_relation("word", x, y, EMPTY, SHARED, SHARED) == IRRELEVANT


def test_low_context_overlap_is_irrelevant():
    x, y = Item("America", Span(0, 1), "GPE"), Item("Canada", Span(0, 1), "GPE")
    assert judge_relation("entity", x, y, EMPTY, {"a", "b"}, {"a", "b", "c"}) == IRRELEVANT


def test_earlier_rule_wins():
    # identical text beats an antonym fact
    kb = KnowledgeBase.from_rows(antonyms=[("possible", "impossible")])
    x = y = Item("possible", Span(0, 1), "adj")
    assert judge_relation("word", x, y, kb, SHARED, SHARED) == EQUIVALENT


def test_antonym_pair():
    kb = KnowledgeBase.from_rows(antonyms=[("largest", "smallest")])
    q = toks("which/WDT is/VBZ the/DT largest/JJS of/IN all/DT ?/.")
    s = toks("it/PRP is/VBZ the/DT smallest/JJS of/IN all/DT ./.")
    pairs = make_pairs(q, s, kb)
    assert [(p.kind, p.x.text, p.y.text, p.mu) for p in pairs] == [("word", "largest", "smallest", -1)]


def test_entity_pair_different():
    q = toks("Who/WP ruled/VBD Prussia/NNP/GPE in/IN the/DT war/NN ?/.")
    s = toks("The/DT king/NN ruled/VBD Warsaw/NNP/GPE in/IN the/DT war/NN ./.")
    pairs = [p for p in make_pairs(q, s, EMPTY, offset=4) if p.kind == "entity"]
    assert [(p.x.text, p.y.text, p.mu) for p in pairs] == [("Prussia", "Warsaw", -1)]
    assert pairs[0].y.span == Span(7, 8)


def test_empty_side_yields_no_pairs():
    assert make_pairs(toks("he/PRP"), toks("New/NNP/GPE York/NNP/GPE"), EMPTY) == []


def test_verb_sequence_order():
    assert verb_sequence(toks("he/PRP was/VBD born/VBN and/CC raised/VBN")) == ["was", "born", "raised"]


POS = st.sampled_from(["NN", "NNS", "NNP", "JJ", "JJS", "RB", "VB", "VBD", "DT", "IN", "PRP", "CD"])
ENT = st.sampled_from(["", "", "GPE", "PERSON"])
TOKEN = st.builds(AnnotatedToken, st.sampled_from(["a", "b", "c", "d"]), POS, ENT)


@given(st.lists(TOKEN, max_size=12), st.integers(0, 5))
def test_each_token_in_at_most_one_set(tokens, offset):
    s = extract_sets(tokens, offset)
    seen = []
    for item in (*s.entities, *s.words):
        seen.extend(range(item.span.start, item.span.end))
    seen.extend(i for _, i in s.verbs)
    assert len(seen) == len(set(seen))
    assert all(offset <= i < offset + len(tokens) for i in seen)
    assert [i for _, i in s.verbs] == sorted(i for _, i in s.verbs)
    assert extract_sets(tokens, offset) == s


@given(st.lists(TOKEN, min_size=1, max_size=8), st.lists(TOKEN, min_size=1, max_size=8))
def test_pairs_are_labelled_and_ordered(q, s):
    kb = KnowledgeBase.from_rows(synonyms=[("a", "b")], antonyms=[("c", "d")])
    pairs = make_pairs(q, s, kb)
    assert all(p.mu in (1, -1) for p in pairs)
    keys = [(p.x.span, p.y.span, p.kind) for p in pairs]
    assert keys == sorted(keys)
    assert make_pairs(q, s, kb) == pairs
