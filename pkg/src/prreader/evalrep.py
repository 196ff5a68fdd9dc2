"""EM/F1 metrics, per-subset reports, cross-evaluation, ablations and explanations."""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .basemodel import forward_encoded
from .constraint import CONSTRAINTS, explain_evidence
from .corpus import SUBSETS
from .prcore import AnswerDistribution
from .train import TrainConfig, e_step, prepare, train_loop

MODES = ("base_p", "regularized_q")
ARTICLES = frozenset({"a", "an", "the"})
_PUNCT = re.escape(string.punctuation)
_STRIP = re.compile(rf"^[{_PUNCT}]+|[{_PUNCT}]+$")


def normalize_tokens(tokens) -> list:
    """Lowercase, strip edge punctuation per token, drop articles and empties.

    ``None`` (a no-answer) normalizes to the empty list.
    """
    if tokens is None:
        return []
    if isinstance(tokens, str):
        tokens = tokens.split()
    out = []
    for t in tokens:
        t = _STRIP.sub("", t.lower())
        if t and t not in ARTICLES:
            out.append(t)
    return out


def exact_match(pred, gold) -> int:
    return int(normalize_tokens(pred) == normalize_tokens(gold))


def f1_score(pred, gold) -> float:
    p, g = normalize_tokens(pred), normalize_tokens(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    precision = common / len(p)
    recall = common / len(g)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ReportRow:
    subset: str
    em: float
    f1: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple

    @classmethod
    def from_scores(cls, scores) -> "EvalReport":
        """``scores`` is an iterable of ``(subset, em, f1)`` per-example values."""
        groups = {}
        for subset, em, f1 in scores:
            groups.setdefault(subset, []).append((em, f1))
        rows = []
        total_em = total_f1 = 0.0
        total_n = 0
        for subset in SUBSETS:
            vals = groups.get(subset)
            if not vals:
                continue
            em = sum(v[0] for v in vals)
            f1 = sum(v[1] for v in vals)
            rows.append(ReportRow(subset, 100.0 * em / len(vals), 100.0 * f1 / len(vals), len(vals)))
            total_em += em
            total_f1 += f1
            total_n += len(vals)
        if total_n:
            rows.append(ReportRow("overall", 100.0 * total_em / total_n, 100.0 * total_f1 / total_n, total_n))
        return cls(tuple(rows))

    def row(self, subset) -> ReportRow:
        for r in self.rows:
            if r.subset == subset:
                return r
        raise KeyError(subset)

    @property
    def overall(self) -> ReportRow:
        return self.row("overall")

    def to_tsv(self) -> str:
        lines = ["subset\tem\tf1\tn"]
        lines += [f"{r.subset}\t{r.em:.1f}\t{r.f1:.1f}\t{r.n}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        return markdown_table(["subset", "em", "f1", "n"],
                              [[r.subset, f"{r.em:.1f}", f"{r.f1:.1f}", str(r.n)] for r in self.rows])

    def format(self, fmt="tsv") -> str:
        if fmt == "md":
            return self.to_markdown()
        if fmt == "tsv":
            return self.to_tsv()
        raise ValueError(f"unknown format {fmt!r}")


def markdown_table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    def line(cells):
        return "| " + " | ".join(str(c).ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def tsv_table(header, rows) -> str:
    return "\n".join("\t".join(str(c) for c in r) for r in [header, *rows]) + "\n"


# -- prediction -----------------------------------------------------------------------

def distributions(theta, omega, prepared, config: TrainConfig, mode="regularized_q"):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "base_p" or omega is None:
        return [AnswerDistribution(pe.candidates, forward_encoded(theta, pe.enc)) for pe in prepared]
    return e_step(prepared, theta, omega, config)


def evaluate(theta, omega, corpus, kb, config: TrainConfig, emb, mode="regularized_q",
             answerable_only=False, prepared=None) -> EvalReport:
    """Score argmax predictions against gold, per subset and overall.

    ``answerable_only`` drops examples without a gold answer.
    """
    if prepared is None:
        prepared = prepare(corpus, emb, config, kb)
    if answerable_only:
        prepared = [pe for pe in prepared if pe.example.answerable]
    scores = []
    for pe, dist in zip(prepared, distributions(theta, omega, prepared, config, mode)):
        e = pe.example
        cand = dist.candidates[dist.argmax()]
        pred = e.span_texts(cand.span) if cand.is_span else None
        gold = e.span_texts(e.answer) if e.answer is not None else None
        scores.append((e.subset, exact_match(pred, gold), f1_score(pred, gold)))
    return EvalReport.from_scores(scores)


# -- experiment harnesses -------------------------------------------------------------------

def filter_subsets(corpus, subsets) -> list:
    subsets = set(subsets)
    unknown = subsets - set(SUBSETS)
    if unknown:
        raise ValueError(f"unknown subsets: {sorted(unknown)}")
    return [e for e in corpus if e.subset in subsets]


def baseline_config(config: TrainConfig) -> TrainConfig:
    return replace(config, enabled_constraints=())


def cross_eval(train_filters, test_filters, train_corpus, test_corpus, kb, config: TrainConfig, emb,
               answerable_only=False) -> dict:
    """Train baseline and PR on each train filter, evaluate on each test filter.

    Returns ``{(train_key, test_key): {"baseline": EvalReport, "pr": EvalReport}}``
    with keys like ``"original+sda"``.
    """
    out = {}
    for tf in train_filters:
        train = filter_subsets(train_corpus, tf)
        if not train:
            raise ValueError(f"train filter {sorted(tf)} selects no examples")
        base_cfg = baseline_config(config)
        base = train_loop(train, kb, base_cfg, emb)
        pr = train_loop(train, kb, config, emb)
        for sf in test_filters:
            test = filter_subsets(test_corpus, sf)
            if not test:
                raise ValueError(f"test filter {sorted(sf)} selects no examples")
            prepared = prepare(test, emb, config, kb)
            out[(subset_key(tf), subset_key(sf))] = {
                "baseline": evaluate(base.theta, None, test, kb, base_cfg, emb, "base_p",
                                     answerable_only, prepared),
                "pr": evaluate(pr.theta, pr.omega, test, kb, config, emb, "regularized_q",
                               answerable_only, prepared),
            }
    return out


def subset_key(subsets) -> str:
    return "+".join(s for s in SUBSETS if s in set(subsets))


def cross_eval_table(results: dict, fmt="tsv") -> str:
    header = ["train", "test", "system", "em", "f1", "n"]
    rows = []
    for (tk, sk), cell in results.items():
        for system in ("baseline", "pr"):
            r = cell[system].overall
            rows.append([tk, sk, system, f"{r.em:.1f}", f"{r.f1:.1f}", str(r.n)])
    return markdown_table(header, rows) if fmt == "md" else tsv_table(header, rows)


ABLATIONS = (
    ("full", CONSTRAINTS),
    ("-entity", ("lexical", "predicate")),
    ("-lexical", ("entity", "predicate")),
    ("-predicate", ("entity", "lexical")),
    ("only-entity", ("entity",)),
    ("only-lexical", ("lexical",)),
    ("only-predicate", ("predicate",)),
    ("none", ()),
)


@dataclass(frozen=True)
class AblationRow:
    name: str
    constraints: tuple
    sda_em: float
    sda_f1: float
    sea_em: float
    sea_f1: float
    report: EvalReport


def _subset_metrics(report, subset):
    try:
        r = report.row(subset)
    except KeyError:
        return float("nan"), float("nan")
    return r.em, r.f1


def ablation(train_corpus, test_corpus, kb, config: TrainConfig, emb, answerable_only=False) -> list:
    """One train/evaluate run per constraint subset; returns 8 :class:`AblationRow`."""
    prepared = prepare(test_corpus, emb, config, kb)
    rows = []
    for name, cons in ABLATIONS:
        cfg = replace(config, enabled_constraints=cons)
        res = train_loop(train_corpus, kb, cfg, emb)
        mode = "regularized_q" if cons else "base_p"
        rep = evaluate(res.theta, res.omega, test_corpus, kb, cfg, emb, mode, answerable_only, prepared)
        rows.append(AblationRow(name, cfg.enabled_constraints, *_subset_metrics(rep, "sda"),
                                *_subset_metrics(rep, "sea"), rep))
    return rows


def ablation_table(rows, fmt="tsv") -> str:
    header = ["setting", "sda_em", "sda_f1", "sea_em", "sea_f1"]
    body = [[r.name, f"{r.sda_em:.1f}", f"{r.sda_f1:.1f}", f"{r.sea_em:.1f}", f"{r.sea_f1:.1f}"]
            for r in rows]
    return markdown_table(header, body) if fmt == "md" else tsv_table(header, body)


# -- explanations ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class SentenceExplanation:
    index: int
    pairs: tuple  # dicts with kind, x, y, mu, alpha
    f: tuple
    lam: tuple
    C: float
    log_h: float


@dataclass(frozen=True)
class ExplanationRecord:
    example_id: str
    subset: str
    sentences: tuple
    prediction: Optional[list]
    gold: Optional[list]
    p_pred: float
    q_pred: float
    p_gold: Optional[float]
    q_gold: Optional[float]

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id, "subset": self.subset,
            "sentences": [{"index": s.index, "pairs": list(s.pairs), "f": list(s.f), "lambda": list(s.lam),
                           "C": s.C, "log_h": s.log_h} for s in self.sentences],
            "prediction": self.prediction, "gold": self.gold,
            "p_pred": self.p_pred, "q_pred": self.q_pred, "p_gold": self.p_gold, "q_gold": self.q_gold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def explain(theta, omega, example, kb, config: TrainConfig, emb, prepared=None) -> ExplanationRecord:
    pe = prepared if prepared is not None else prepare([example], emb, config, kb)[0]
    e = pe.example
    sentences = []
    for k, ev in enumerate(pe.evidence):
        ce = explain_evidence(ev, omega, config.enabled_constraints)
        pairs = tuple({"kind": p.kind, "x": p.x.text, "y": p.y.text, "mu": p.mu, "alpha": float(a)}
                      for p, a in zip(ce.pairs, ce.alphas))
        sentences.append(SentenceExplanation(k, pairs, tuple(float(v) for v in ce.f),
                                             tuple(float(v) for v in ce.lam), float(ce.C), float(ce.log_h)))
    p = AnswerDistribution(pe.candidates, forward_encoded(theta, pe.enc))
    q = e_step([pe], theta, omega, config)[0]
    i = q.argmax()
    cand = pe.candidates[i]
    pp, qp = p.probs, q.probs
    return ExplanationRecord(
        example_id=e.id, subset=e.subset, sentences=tuple(sentences),
        prediction=e.span_texts(cand.span) if cand.is_span else None,
        gold=e.span_texts(e.answer) if e.answer is not None else None,
        p_pred=float(pp[i]), q_pred=float(qp[i]),
        p_gold=None if pe.gold is None else float(pp[pe.gold]),
        q_gold=None if pe.gold is None else float(qp[pe.gold]),
    )


def recompute_log_h(s: SentenceExplanation) -> float:
    return s.C * float(np.dot(s.lam, s.f))


def explain_all(theta, omega, corpus: Sequence, kb, config, emb) -> list:
    prepared = prepare(corpus, emb, config, kb)
    return [explain(theta, omega, pe.example, kb, config, emb, pe) for pe in prepared]
