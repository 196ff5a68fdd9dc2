"""Bilinear start/end span scorer over fixed embeddings.

``p(span) = p(start | x) * p(end | start, x)`` where the start distribution
covers every passage token plus a no-answer slot and the end distribution for
a start covers its legal ends (same sentence, bounded length).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Example, candidate_spans, gold_index
from .embedding import EmbeddingTable
from .prcore import AnswerDistribution


@dataclass(frozen=True, eq=False)
class BaseParams:
    Ws: np.ndarray
    We: np.ndarray
    na_bias: float = 0.0

    def __post_init__(self):
        if self.Ws.shape != self.We.shape or self.Ws.shape[0] != self.Ws.shape[1]:
            raise ValueError("Ws and We must be square and of equal shape")
        if not (np.all(np.isfinite(self.Ws)) and np.all(np.isfinite(self.We))
                and np.isfinite(self.na_bias)):
            raise ValueError("base parameters must be finite")

    @property
    def dim(self):
        return self.Ws.shape[0]

    def trainable(self) -> dict:
        return {"Ws": self.Ws, "We": self.We, "na_bias": np.asarray(self.na_bias, dtype=np.float64)}

    def with_trainable(self, arrays) -> "BaseParams":
        return replace(self, Ws=np.asarray(arrays["Ws"]), We=np.asarray(arrays["We"]),
                       na_bias=float(arrays["na_bias"]))


def init_base_params(dim, rng=None, scale=0.01) -> BaseParams:
    if rng is None:
        return BaseParams(np.zeros((dim, dim)), np.zeros((dim, dim)), 0.0)
    return BaseParams(rng.normal(0, scale, (dim, dim)), rng.normal(0, scale, (dim, dim)), 0.0)


@dataclass(frozen=True, eq=False)
class EncodedExample:
    """Embedded example plus the index layout of its candidate set."""

    example: Example
    candidates: tuple
    P: np.ndarray       # passage embeddings (n, d)
    qbar: np.ndarray    # mean question embedding (d,)
    starts: np.ndarray  # start token of each span candidate
    lasts: np.ndarray   # last token (end - 1) of each span candidate
    endmat: np.ndarray  # (n, L) legal last-token indices per start (padded)
    endmask: np.ndarray  # (n, L) validity of endmat entries


def encode(emb: EmbeddingTable, e: Example, candidates) -> EncodedExample:
    candidates = tuple(candidates)
    n = len(e.passage)
    if not candidates or candidates[-1].is_span or any(not c.is_span for c in candidates[:-1]):
        raise ValueError("candidates must be spans followed by one no-answer slot")
    spans = [c.span for c in candidates[:-1]]
    if spans != sorted(spans):
        raise ValueError("span candidates must be in (start, end) order")
    counts = np.zeros(n, dtype=int)
    for c in candidates[:-1]:
        s = c.span
        if s.end > n or not e.sentences[c.sentence_index].contains(s):
            raise ValueError("candidate inconsistent with example")
        if s.end != s.start + 1 + counts[s.start]:
            raise ValueError("legal ends for a start must be contiguous")
        counts[s.start] += 1
    if np.any(counts == 0):
        raise ValueError("every passage token must start at least one candidate")
    L = int(counts.max())
    offs = np.arange(L)
    endmat = np.minimum(np.arange(n)[:, None] + offs[None, :], n - 1)
    endmask = offs[None, :] < counts[:, None]
    return EncodedExample(
        example=e, candidates=candidates,
        P=emb.matrix([t.text for t in e.passage]),
        qbar=emb.matrix([t.text for t in e.question]).mean(0),
        starts=np.array([s.start for s in spans], dtype=int),
        lasts=np.array([s.end - 1 for s in spans], dtype=int),
        endmat=endmat, endmask=endmask,
    )


def _scores(params: BaseParams, enc: EncodedExample):
    s = enc.P @ (params.Ws.T @ enc.qbar)
    t = enc.P @ (params.We.T @ enc.qbar)
    s_all = np.append(s, params.na_bias)
    m = s_all.max()
    log_start = s_all - (m + np.log(np.exp(s_all - m).sum()))
    T = np.where(enc.endmask, t[enc.endmat], -np.inf)
    tm = T.max(axis=1)
    end_norm = tm + np.log(np.exp(T - tm[:, None]).sum(axis=1))
    return log_start, t, T, end_norm


def forward_encoded(params: BaseParams, enc: EncodedExample) -> np.ndarray:
    log_start, t, _, end_norm = _scores(params, enc)
    n = len(enc.P)
    span = log_start[enc.starts] + t[enc.lasts] - end_norm[enc.starts]
    return np.append(span, log_start[n])


def forward(params: BaseParams, emb: EmbeddingTable, e: Example, candidates) -> AnswerDistribution:
    enc = encode(emb, e, candidates)
    return AnswerDistribution(enc.candidates, forward_encoded(params, enc))


def cross_entropy_grads(params: BaseParams, enc: EncodedExample, target):
    """``-sum(target * log p)`` and its gradients w.r.t. ``Ws``, ``We``, ``na_bias``."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (len(enc.candidates),):
        raise ValueError("target must align with candidates")
    if np.any(target < 0) or abs(target.sum() - 1.0) > 1e-9:
        raise ValueError("target distribution is not normalized")
    return weighted_cross_entropy(params, enc, target)


def weighted_cross_entropy(params: BaseParams, enc: EncodedExample, target):
    """Like :func:`cross_entropy_grads` but ``target`` may be any non-negative weights."""
    log_start, t, T, end_norm = _scores(params, enc)
    n = len(enc.P)
    log_p = np.append(log_start[enc.starts] + t[enc.lasts] - end_norm[enc.starts], log_start[n])
    nz = target > 0
    loss = -float(target[nz] @ log_p[nz])

    w_span = target[:-1]
    w_start = np.bincount(enc.starts, weights=w_span, minlength=n)
    g_start = np.exp(log_start) * target.sum() - np.append(w_start, target[-1])
    end_soft = np.exp(T - end_norm[:, None]) * w_start[:, None]
    g_end = np.bincount(enc.endmat[enc.endmask], weights=end_soft[enc.endmask], minlength=n)
    g_end -= np.bincount(enc.lasts, weights=w_span, minlength=n)
    grads = {
        "Ws": np.outer(enc.qbar, enc.P.T @ g_start[:n]),
        "We": np.outer(enc.qbar, enc.P.T @ g_end),
        "na_bias": np.asarray(g_start[n]),
    }
    return loss, grads


def nll_and_grads(params, emb, e, candidates, target=None):
    """Cross-entropy against ``target`` (an AnswerDistribution, a probability
    vector, or None for one-hot gold)."""
    enc = encode(emb, e, candidates)
    if target is None:
        g = gold_index(enc.candidates, e)
        if g is None:
            raise ValueError("gold answer is not among the candidates")
        target = np.zeros(len(enc.candidates))
        target[g] = 1.0
    elif isinstance(target, AnswerDistribution):
        target = target.probs
    return cross_entropy_grads(params, enc, target)


def predict(params: BaseParams, emb: EmbeddingTable, e: Example, max_len: int = 15):
    cands = candidate_spans(e, max_len)
    dist = forward(params, emb, e, cands)
    return dist.candidates[dist.argmax()]
