"""Pretraining and the mutual-distillation EM loop.

Per minibatch the loop runs, in order:

1. E-step: ``q ∝ p · exp(C Σ λ f)`` for every example,
2. θ-step: Adam on ``-(E_gold log p + β E_q log p)`` with ``q`` held fixed,
3. ω-step: Adam on the squared error of ``log h`` against ±1 targets,
4. λ-step: one projected gradient-ascent step on the mean gold probability
   under ``q``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .basemodel import BaseParams, encode, forward_encoded, init_base_params, weighted_cross_entropy
from .constraint import (CONSTRAINTS, GATES, LSTM_TENSORS, ConstraintParams, build_evidence,
                         constraint_mask, evidence_mse_grads, evidence_scores,
                         init_constraint_params)
from .corpus import (AnnotatedToken, Candidate, Example, Span, candidate_spans, gold_index,
                     sentence_of_span)
from .embedding import EmbeddingTable
from .kb import KnowledgeBase
from .lingfeat import FeaturePair, Item
from .prcore import AnswerDistribution, regularize

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ADAM_B1, ADAM_B2, ADAM_EPS = 0.9, 0.999, 1e-8


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    beta: float = 0.005
    lambda_init: tuple = (1.0, 1.0, 1.0)
    lr_theta: float = 0.05
    lr_omega: float = 0.01
    lr_lambda: float = 0.1
    epochs_pretrain: int = 10
    epochs_joint: int = 10
    batch_size: int = 32
    max_span_len: int = 15
    embed_dim: int = 32
    lstm_hidden: int = 16
    seed: int = 0
    enabled_constraints: tuple = CONSTRAINTS
    share_attention: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lambda_init", tuple(float(x) for x in self.lambda_init))
        constraint_mask(self.enabled_constraints)
        object.__setattr__(self, "enabled_constraints", tuple(
            c for c in CONSTRAINTS if c in set(self.enabled_constraints)))
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if min(self.lr_theta, self.lr_omega, self.lr_lambda) <= 0:
            raise ValueError("learning rates must be positive")
        if len(self.lambda_init) != 3:
            raise ValueError("lambda_init needs 3 entries")
        if self.batch_size < 1 or self.max_span_len < 1:
            raise ValueError("batch_size and max_span_len must be >= 1")

    @property
    def mask(self):
        return constraint_mask(self.enabled_constraints)

    @property
    def constrained(self) -> bool:
        return bool(self.enabled_constraints)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in names}
        for k in ("lambda_init", "enabled_constraints"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)


# -- Adam -----------------------------------------------------------------------------

@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """One Adam update; returns ``(new_params, new_state)``."""
    if set(grads) - set(params):
        raise ValueError(f"gradients for unknown parameters: {sorted(set(grads) - set(params))}")
    t = state.t + 1
    new_params, m_new, v_new = dict(params), {}, {}
    for k, p in params.items():
        p = np.asarray(p, dtype=np.float64)
        g = grads.get(k)
        g = np.zeros_like(p) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"shape mismatch for {k}: {g.shape} vs {p.shape}")
        m = state.m.get(k, np.zeros_like(p))
        v = state.v.get(k, np.zeros_like(p))
        m = ADAM_B1 * m + (1 - ADAM_B1) * g
        v = ADAM_B2 * v + (1 - ADAM_B2) * g * g
        m_hat = m / (1 - ADAM_B1 ** t)
        v_hat = v / (1 - ADAM_B2 ** t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        m_new[k], v_new[k] = m, v
    return new_params, OptimizerState(m_new, v_new, t)


# -- prepared data ----------------------------------------------------------------------

class Prepared:
    """An example with cached embeddings, candidate layout and sentence evidence."""

    def __init__(self, example: Example, emb: EmbeddingTable, max_len: int, kb: Optional[KnowledgeBase]):
        self.example = example
        self.enc = encode(emb, example, candidate_spans(example, max_len))
        self.gold = gold_index(self.enc.candidates, example)
        self.cand_sentence = np.array(
            [c.sentence_index if c.is_span else -1 for c in self.enc.candidates], dtype=int)
        self._emb, self._kb = emb, kb
        self._evidence = None

    @property
    def candidates(self):
        return self.enc.candidates

    @property
    def evidence(self):
        if self._evidence is None:
            if self._kb is None:
                raise TrainingError("knowledge base required for constraint evidence")
            e = self.example
            self._evidence = [
                build_evidence(e.question, e.sentence_tokens(k), self._kb, self._emb, s.start)
                for k, s in enumerate(e.sentences)]
        return self._evidence

    def sentence_scores(self, omega: ConstraintParams) -> np.ndarray:
        """``(n_sentences, 3)`` constraint values."""
        return np.stack([evidence_scores(ev, omega)[0] for ev in self.evidence])

    def candidate_scores(self, F: np.ndarray) -> np.ndarray:
        """Broadcast per-sentence values to candidates; the no-answer slot gets zeros."""
        out = np.zeros((len(self.cand_sentence), F.shape[1]))
        span = self.cand_sentence >= 0
        out[span] = F[self.cand_sentence[span]]
        return out


def prepare(corpus, emb, config: TrainConfig, kb=None) -> list:
    return [Prepared(e, emb, config.max_span_len, kb) for e in corpus]


# -- targets -----------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainTarget:
    example_id: str
    candidate: Candidate
    label: float

    def __post_init__(self):
        if self.label not in (1.0, -1.0):
            raise ValueError("label must be +1 or -1")


def _random_span_in(sentence: Span, rng, max_len: int) -> Span:
    start = sentence.start + int(rng.integers(len(sentence)))
    longest = min(max_len, sentence.end - start)
    return Span(start, start + 1 + int(rng.integers(longest)))


def make_targets(corpus, rng, max_len: int = 15) -> list:
    """±1 regression targets for ``log h``.

    Gold spans of original and SEA examples are positive, plus one negative in
    a random other sentence; SDA examples give one negative in the altered
    sentence (the distractor, or the would-be gold of an altered question).
    """
    out = []
    for e in corpus:
        if e.subset in ("original", "sea") and e.answer is not None:
            k = sentence_of_span(e, e.answer)
            out.append(TrainTarget(e.id, Candidate("span", e.answer, k), 1.0))
            others = [j for j in range(len(e.sentences)) if j != k]
            if others:
                j = others[int(rng.integers(len(others)))]
                span = _random_span_in(e.sentences[j], rng, max_len)
                out.append(TrainTarget(e.id, Candidate("span", span, j), -1.0))
        elif e.subset == "sda":
            span = e.adv_span
            if span is None and e.answer is not None:
                last = e.sentences[-1]
                span = Span(last.start, last.start + 1)
            if span is not None:
                out.append(TrainTarget(e.id, Candidate("span", span, sentence_of_span(e, span)), -1.0))
    return out


# -- steps -----------------------------------------------------------------------------------

def _effective_lambda(omega: ConstraintParams, config: TrainConfig):
    return omega.lam * config.mask


def e_step(batch, theta: BaseParams, omega: ConstraintParams, config: TrainConfig) -> list:
    """Regularized posteriors ``q`` for each prepared example."""
    lam = _effective_lambda(omega, config)
    out = []
    for pe in batch:
        p = AnswerDistribution(pe.candidates, forward_encoded(theta, pe.enc))
        if not lam.any():
            out.append(p)
            continue
        log_h_sent = omega.C * (pe.sentence_scores(omega) @ lam)
        log_h = np.where(pe.cand_sentence >= 0, log_h_sent[np.maximum(pe.cand_sentence, 0)], 0.0)
        out.append(regularize(p, log_h))
    return out


def theta_grads(batch, theta, qs, beta):
    """Batch means of ``-log p_gold`` and ``-E_q log p`` plus gradients of
    their ``1 : beta`` combination."""
    grads = {k: np.zeros_like(v) for k, v in theta.trainable().items()}
    nll = distill = 0.0
    n = 0
    for i, pe in enumerate(batch):
        if pe.gold is None:
            continue
        log_p = None
        w = np.zeros(len(pe.candidates))
        w[pe.gold] = 1.0
        if qs is not None and beta > 0:
            q = qs[i].probs
            w = w + beta * q
            log_p = forward_encoded(theta, pe.enc)
            distill -= float(q[q > 0] @ log_p[q > 0])
        loss, g = weighted_cross_entropy(theta, pe.enc, w)
        nll += loss if log_p is None else -float(log_p[pe.gold])
        for k in grads:
            grads[k] += g[k]
        n += 1
    if n == 0:
        return 0.0, 0.0, grads, 0
    for k in grads:
        grads[k] /= n
    return nll / n, distill / n, grads, n


def m_step_theta(batch, qs, theta: BaseParams, state: OptimizerState, config: TrainConfig):
    """One Adam step of the distillation objective. ``qs=None`` means plain NLL."""
    use_q = qs if (config.beta > 0 and qs is not None) else None
    nll, distill, grads, n = theta_grads(batch, theta, use_q, config.beta)
    if n == 0:
        return theta, state, nll, distill
    new, state = adam_step(theta.trainable(), grads, state, config.lr_theta)
    return theta.with_trainable(new), state, nll, distill


def m_step_omega(items, omega: ConstraintParams, state: OptimizerState, config: TrainConfig):
    """``items`` are ``(SentenceEvidence, target)`` pairs."""
    if not items:
        return omega, state, 0.0
    evs, ts = zip(*items)
    loss, grads = evidence_mse_grads(list(evs), list(ts), omega, config.enabled_constraints)
    new, state = adam_step(omega.trainable(), grads, state, config.lr_omega)
    return omega.with_trainable(new), state, loss


def lambda_gradient(log_p, F, gold, lam, C):
    """Gradient of ``q(gold)`` w.r.t. ``lam`` where ``q ∝ exp(log_p + C F lam)``.

    ``F`` holds one row of constraint values per candidate.
    """
    s = log_p + C * (F @ lam)
    q = np.exp(s - s.max())
    q /= q.sum()
    return q[gold] * C * (F[gold] - q @ F)


def project_lambda(lam, grad, lr, mask=None):
    """Gradient-ascent step restricted to ``mask``, then clamp at zero."""
    mask = np.ones(3) if mask is None else np.asarray(mask)
    return np.maximum(np.asarray(lam, dtype=np.float64) + lr * np.asarray(grad) * mask, 0.0)


def update_lambda(batch, theta, omega, config: TrainConfig) -> ConstraintParams:
    """One projected ascent step on the batch-mean gold probability under ``q``.

    Only answerable examples count; without any the call is a no-op.
    """
    mask = config.mask
    lam = omega.lam
    grad, n = np.zeros(3), 0
    for pe in batch:
        if not pe.example.answerable or pe.gold is None:
            continue
        log_p = forward_encoded(theta, pe.enc)
        F = pe.candidate_scores(pe.sentence_scores(omega)) * mask
        grad += lambda_gradient(log_p, F, pe.gold, lam * mask, omega.C)
        n += 1
    if n == 0:
        return omega
    return omega.with_lambda(project_lambda(lam, grad / n, config.lr_lambda, mask))


# -- loops ---------------------------------------------------------------------------------------

@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    COLUMNS = ("epoch", "nll", "distill_loss", "omega_mse", "lambda1", "lambda2", "lambda3")

    def to_tsv(self) -> str:
        lines = ["\t".join(self.COLUMNS)]
        for r in self.rows:
            lines.append("\t".join(str(r[c]) if c == "epoch" else repr(float(r[c])) for c in self.COLUMNS))
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    theta: BaseParams
    omega: ConstraintParams
    log: TrainingLog

    @property
    def lam(self):
        return self.omega.lam

    def __iter__(self):
        return iter((self.theta, self.omega, self.omega.lam, self.log))


class _Streams:
    def __init__(self, seed):
        self.shuffle = np.random.default_rng([seed, 1])
        self.theta_init = np.random.default_rng([seed, 2])
        self.omega_init = np.random.default_rng([seed, 3])
        self.targets = np.random.default_rng([seed, 4])


def _batches(n, rng, size):
    order = rng.permutation(n)
    for i in range(0, n, size):
        yield order[i:i + size]


def _check_finite(*vals, where=""):
    for v in vals:
        if not math.isfinite(v):
            raise TrainingError(f"non-finite loss encountered in {where}")


def _pretrain_epochs(data, theta, state, streams, config, epochs, on_epoch=None, start_epoch=0):
    for ep in range(epochs):
        losses = []
        for idx in _batches(len(data), streams.shuffle, config.batch_size):
            theta, state, nll, _ = m_step_theta([data[i] for i in idx], None, theta, state, config)
            _check_finite(nll, where="pretraining")
            losses.append(nll)
        log.debug("pretrain epoch %d nll %.4f", start_epoch + ep + 1, np.mean(losses) if losses else 0.0)
        if on_epoch is not None:
            on_epoch("pretrain", start_epoch + ep + 1, theta, None)
    return theta, state


def pretrain(corpus, config: TrainConfig, emb: EmbeddingTable, on_epoch=None) -> BaseParams:
    if not corpus:
        raise ValueError("empty corpus")
    streams = _Streams(config.seed)
    theta = init_base_params(emb.dim, streams.theta_init)
    data = prepare(corpus, emb, config)
    theta, _ = _pretrain_epochs(data, theta, OptimizerState(), streams, config,
                                config.epochs_pretrain, on_epoch)
    return theta


def init_omega(config: TrainConfig, dim: int, rng) -> ConstraintParams:
    return init_constraint_params(dim, config.lstm_hidden, rng, lam=config.lambda_init,
                                  C=config.C, share_attention=config.share_attention)


def train_loop(corpus, kb: KnowledgeBase, config: TrainConfig, emb: Optional[EmbeddingTable] = None,
               on_epoch: Optional[Callable] = None) -> TrainResult:
    if not corpus:
        raise ValueError("empty corpus")
    if emb is None:
        emb = EmbeddingTable(config.embed_dim, oov_seed=config.seed)
    streams = _Streams(config.seed)
    data = prepare(corpus, emb, config, kb)
    by_id = {pe.example.id: pe for pe in data}
    theta = init_base_params(emb.dim, streams.theta_init)
    t_state = OptimizerState()
    theta, t_state = _pretrain_epochs(data, theta, t_state, streams, config,
                                      config.epochs_pretrain, on_epoch)
    omega = init_omega(config, emb.dim, streams.omega_init)
    o_state = OptimizerState()
    tlog = TrainingLog()
    for ep in range(1, config.epochs_joint + 1):
        sums = np.zeros(3)
        nb = 0
        for idx in _batches(len(data), streams.shuffle, config.batch_size):
            batch = [data[i] for i in idx]
            qs = e_step(batch, theta, omega, config) if config.constrained else None
            theta, t_state, nll, distill = m_step_theta(batch, qs, theta, t_state, config)
            mse = 0.0
            if config.constrained:
                targets = make_targets([pe.example for pe in batch], streams.targets, config.max_span_len)
                items = [(by_id[t.example_id].evidence[t.candidate.sentence_index], t.label)
                         for t in targets]
                omega, o_state, mse = m_step_omega(items, omega, o_state, config)
                omega = update_lambda(batch, theta, omega, config)
            _check_finite(nll, distill, mse, where=f"joint epoch {ep}")
            sums += (nll, distill, mse)
            nb += 1
        nll, distill, mse = sums / max(nb, 1)
        tlog.rows.append({"epoch": ep, "nll": nll, "distill_loss": distill, "omega_mse": mse,
                          "lambda1": omega.lam[0], "lambda2": omega.lam[1], "lambda3": omega.lam[2]})
        log.info("epoch %d nll %.4f distill %.4f omega_mse %.4f lambda %s",
                 ep, nll, distill, mse, np.round(omega.lam, 4))
        if on_epoch is not None:
            on_epoch("joint", config.epochs_pretrain + ep, theta, omega)
    return TrainResult(theta, omega, tlog)


# -- finite differences ----------------------------------------------------------------------------

def finite_diff_check(fun, x, step=1e-5) -> float:
    """Max relative error between ``fun(x)[1]`` and central differences of ``fun(x)[0]``.

    The relative error per coordinate is ``|a - n| / max(1, |a|, |n|)``.
    """
    x = np.array(x, dtype=np.float64)
    _, analytic = fun(x)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(x.shape)
    worst = 0.0
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        numeric = (fun(xp)[0] - fun(xm)[0]) / (2 * step)
        a = analytic[idx]
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a), abs(numeric)))
    return worst


def check_param_groups(loss_and_grads, params: dict, step=1e-5) -> dict:
    """Run :func:`finite_diff_check` for every tensor of ``params``.

    ``loss_and_grads(params) -> (loss, grads)`` with ``grads`` keyed like ``params``.
    """
    out = {}
    for name in params:
        def fun(x, name=name):
            trial = dict(params)
            trial[name] = x.reshape(np.shape(params[name]))
            loss, grads = loss_and_grads(trial)
            return loss, np.asarray(grads[name])
        out[name] = finite_diff_check(fun, np.asarray(params[name], dtype=np.float64), step)
    return out


def _random_tokens(rng, n, n_verbs, vocab):
    pos = ["VBD"] * n_verbs + ["NN"] * (n - n_verbs)
    rng.shuffle(pos)
    return tuple(AnnotatedToken(vocab[int(rng.integers(len(vocab)))], p) for p in pos)


def _random_pairs(rng, question, sentence, offset, n_pairs):
    pairs = []
    for _ in range(n_pairs):
        kind = ("entity", "word")[int(rng.integers(2))]
        i = int(rng.integers(len(question)))
        j = int(rng.integers(len(sentence)))
        xs = Span(i, i + 1 + int(rng.integers(len(question) - i)))
        ys = Span(j, j + 1 + int(rng.integers(len(sentence) - j)))
        x = Item(" ".join(t.text for t in question[xs.start:xs.end]), xs, "X")
        y = Item(" ".join(t.text for t in sentence[ys.start:ys.end]), ys.shift(offset), "X")
        pairs.append(FeaturePair(kind, x, y, int(rng.choice([-1, 1]))))
    return pairs


def gradcheck_instance(seed, max_len=5, max_dim=4, max_hidden=3):
    """A small random problem for both gradient oracles.

    Returns ``(omega, evidences, targets, enabled, theta, enc, weights)``;
    sequences have at most ``max_len`` tokens and at least two verbs so every
    LSTM tensor receives gradient.
    """
    rng = np.random.default_rng([seed, 77])
    d = int(rng.integers(2, max_dim + 1))
    H = int(rng.integers(1, max_hidden + 1))
    vocab = [f"w{i}" for i in range(12)]
    emb = EmbeddingTable(d, oov_seed=seed)
    omega = init_constraint_params(d, H, rng, lam=rng.uniform(0.2, 2.0, 3), C=float(rng.uniform(0.5, 2.0)),
                                   share_attention=bool(seed % 2), scale=0.5)
    omega = omega.with_trainable({**omega.trainable(), "W3": rng.normal(0, 0.5, 4 * H),
                                  "b3": np.asarray(rng.normal(0, 0.5))})
    evidences, targets = [], []
    for _ in range(2):
        m, n = (int(rng.integers(2, max_len + 1)) for _ in range(2))
        q = _random_tokens(rng, m, 2, vocab)
        s = _random_tokens(rng, n, 2, vocab)
        pairs = _random_pairs(rng, q, s, 0, 3)
        evidences.append(build_evidence(q, s, None, emb, 0, pairs=pairs))
        targets.append(float(rng.choice([-1.0, 1.0])))

    n = int(rng.integers(2, max_len + 1))
    passage = _random_tokens(rng, n, 0, vocab)
    k = int(rng.integers(1, n))
    sentences = (Span(0, k), Span(k, n))
    e = Example(f"gc-{seed}", "original", _random_tokens(rng, int(rng.integers(1, max_len + 1)), 0, vocab),
                passage, sentences, answer=Span(0, 1))
    enc = encode(emb, e, candidate_spans(e, 3))
    theta = BaseParams(rng.normal(0, 1, (d, d)), rng.normal(0, 1, (d, d)), float(rng.normal()))
    w = np.zeros(len(enc.candidates))
    w[gold_index(enc.candidates, e)] = 1.0
    w += 0.005 * rng.dirichlet(np.ones(len(w)))
    return omega, evidences, targets, CONSTRAINTS, theta, enc, w


def gradient_check(seed, step=1e-5) -> dict:
    """Max relative finite-difference error per parameter group."""
    omega, evidences, targets, enabled, theta, enc, w = gradcheck_instance(seed)

    def omega_loss(arrays):
        return evidence_mse_grads(evidences, targets, omega.with_trainable(arrays), enabled)

    def theta_loss(arrays):
        return weighted_cross_entropy(theta.with_trainable(arrays), enc, w)

    out = check_param_groups(omega_loss, omega.trainable(), step)
    out.update(check_param_groups(theta_loss, theta.trainable(), step))
    return out


# -- checkpoints ---------------------------------------------------------------------------------------

def _tolist(a):
    return np.asarray(a, dtype=np.float64).tolist()


def save_checkpoint(path, config: TrainConfig, theta: BaseParams, omega: ConstraintParams,
                    emb: Optional[EmbeddingTable] = None) -> None:
    meta = {"config": asdict(config), "format_version": FORMAT_VERSION}
    meta["config"]["lambda_init"] = list(config.lambda_init)
    meta["config"]["enabled_constraints"] = list(config.enabled_constraints)
    om = {"W1": _tolist(omega.W1), "lstm": {k: _tolist(omega.lstm[k]) for k in LSTM_TENSORS},
          "W3": _tolist(omega.W3), "b3": float(omega.b3), "C": float(omega.C)}
    if omega.W2 is not None:
        om["W2"] = _tolist(omega.W2)
    doc = {
        "meta": meta,
        "theta": {"Ws": _tolist(theta.Ws), "We": _tolist(theta.We), "na_bias": float(theta.na_bias)},
        "omega": om,
        "lambda": _tolist(omega.lam),
        "embeddings": None if emb is None else {
            "file": emb.source, "dim": emb.dim, "oov_seed": emb.oov_seed},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Return ``(config, theta, omega, embeddings_ref)``."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("meta", {}).get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format")
    config = TrainConfig.from_dict(doc["meta"]["config"])
    th = doc["theta"]
    theta = BaseParams(np.array(th["Ws"]), np.array(th["We"]), float(th["na_bias"]))
    om = doc["omega"]
    omega = ConstraintParams(
        W1=np.array(om["W1"]), lstm={k: np.array(om["lstm"][k]) for k in LSTM_TENSORS},
        W3=np.array(om["W3"]), b3=float(om["b3"]), lam=np.array(doc["lambda"], dtype=np.float64),
        C=float(om.get("C", config.C)), W2=np.array(om["W2"]) if "W2" in om else None)
    return config, theta, omega, doc.get("embeddings")


def embeddings_from_ref(ref, config: TrainConfig) -> EmbeddingTable:
    if ref and ref.get("file"):
        return EmbeddingTable.load(ref["file"], oov_seed=ref.get("oov_seed", config.seed))
    if ref:
        return EmbeddingTable(ref["dim"], oov_seed=ref.get("oov_seed", config.seed))
    return EmbeddingTable(config.embed_dim, oov_seed=config.seed)


__all__ = [
    "TrainConfig", "OptimizerState", "TrainTarget", "TrainResult", "TrainingLog", "TrainingError",
    "adam_step", "make_targets", "e_step", "m_step_theta", "m_step_omega", "update_lambda",
    "lambda_gradient", "project_lambda", "pretrain", "train_loop", "finite_diff_check", "check_param_groups",
    "save_checkpoint", "load_checkpoint", "gradient_check", "gradcheck_instance", "prepare", "Prepared", "GATES",
]
