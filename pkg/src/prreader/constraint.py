"""Learnable linguistic constraint functions.

Three scores are computed for a (question, sentence) pair:

* entity: attention-weighted sum of entity-pair labels,
* lexical: the same over word pairs,
* predicate: ``tanh(W3 [a; b; a-b; a*b] + b3)`` over LSTM encodings of the
  two verb sequences.

They combine into the log-space score ``log_h = C * sum(lambda * f)``.
All backward passes are written out by hand.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .embedding import EmbeddingTable
from .kb import KnowledgeBase
from .lingfeat import FeaturePair, make_pairs, verb_sequence

CONSTRAINTS = ("entity", "lexical", "predicate")
GATES = ("i", "f", "o", "g")
LSTM_TENSORS = tuple(f"{k}_{g}" for g in GATES for k in ("W", "U", "b"))


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def constraint_mask(enabled) -> np.ndarray:
    enabled = set(CONSTRAINTS if enabled is None else enabled)
    unknown = enabled - set(CONSTRAINTS)
    if unknown:
        raise ValueError(f"unknown constraints: {sorted(unknown)}")
    return np.array([1.0 if c in enabled else 0.0 for c in CONSTRAINTS])


@dataclass(frozen=True, eq=False)
class ConstraintParams:
    W1: np.ndarray
    lstm: dict
    W3: np.ndarray
    b3: float
    lam: np.ndarray
    C: float = 1.0
    W2: Optional[np.ndarray] = None  # lexical attention; None means shared with W1

    def __post_init__(self):
        d = self.W1.shape[0]
        if self.W1.shape != (d, d):
            raise ValueError("W1 must be square")
        if self.W2 is not None and self.W2.shape != (d, d):
            raise ValueError("W2 must match W1")
        H = self.lstm["U_i"].shape[0]
        for g in GATES:
            if (self.lstm[f"W_{g}"].shape != (H, d) or self.lstm[f"U_{g}"].shape != (H, H)
                    or self.lstm[f"b_{g}"].shape != (H,)):
                raise ValueError(f"lstm gate {g} has inconsistent shapes")
        if self.W3.shape != (4 * H,):
            raise ValueError("W3 must have 4H entries")
        if np.shape(self.lam) != (3,):
            raise ValueError("lam must have 3 entries")
        if not self.C > 0:
            raise ValueError("C must be positive")

    @property
    def dim(self):
        return self.W1.shape[0]

    @property
    def hidden(self):
        return self.lstm["U_i"].shape[0]

    @property
    def W_lexical(self):
        return self.W1 if self.W2 is None else self.W2

    @functools.cached_property
    def _stacked(self):
        L = self.lstm
        return (np.concatenate([L[f"W_{g}"] for g in GATES]),
                np.concatenate([L[f"U_{g}"] for g in GATES]),
                np.concatenate([L[f"b_{g}"] for g in GATES]))

    def trainable(self) -> dict:
        """Trainable tensors by name (lambda and C excluded)."""
        out = {"W1": self.W1}
        if self.W2 is not None:
            out["W2"] = self.W2
        out.update({f"lstm.{k}": self.lstm[k] for k in LSTM_TENSORS})
        out["W3"] = self.W3
        out["b3"] = np.asarray(self.b3, dtype=np.float64)
        return out

    def with_trainable(self, arrays: dict) -> "ConstraintParams":
        lstm = {k: np.asarray(arrays.get(f"lstm.{k}", self.lstm[k])) for k in LSTM_TENSORS}
        return replace(
            self,
            W1=np.asarray(arrays.get("W1", self.W1)),
            W2=None if self.W2 is None else np.asarray(arrays.get("W2", self.W2)),
            lstm=lstm,
            W3=np.asarray(arrays.get("W3", self.W3)),
            b3=float(arrays.get("b3", self.b3)),
        )

    def with_lambda(self, lam) -> "ConstraintParams":
        return replace(self, lam=np.asarray(lam, dtype=np.float64))


def init_constraint_params(dim, hidden, rng, lam=(1.0, 1.0, 1.0), C=1.0, share_attention=True,
                           scale=0.1) -> ConstraintParams:
    """W1 and LSTM tensors uniform in [-scale, scale]; W3 and b3 start at zero."""
    u = lambda *shape: rng.uniform(-scale, scale, shape)  # noqa: E731
    W1 = u(dim, dim)
    W2 = None if share_attention else u(dim, dim)
    lstm = {}
    for g in GATES:
        lstm[f"W_{g}"] = u(hidden, dim)
        lstm[f"U_{g}"] = u(hidden, hidden)
        lstm[f"b_{g}"] = u(hidden)
    return ConstraintParams(W1=W1, lstm=lstm, W3=np.zeros(4 * hidden), b3=0.0,
                            lam=np.asarray(lam, dtype=np.float64), C=float(C), W2=W2)


# -- attention ----------------------------------------------------------------

def attention_weights(x_emb, y_emb, W1):
    """Token attention over the question (``o_x``) and sentence (``o_y``).

    ``score_x[i] = sum_j y_j^T W1 x_i`` and symmetrically for ``score_y``;
    each output is a softmax over its own sequence.
    """
    x_emb, y_emb = np.asarray(x_emb, float), np.asarray(y_emb, float)
    if len(x_emb) == 0 or len(y_emb) == 0:
        raise ValueError("empty attention input")
    ox = softmax(x_emb @ (W1.T @ y_emb.sum(0)))
    oy = softmax(y_emb @ (W1.T @ x_emb.sum(0)))
    return ox, oy


def pair_weight(ox, oy, x_span, y_span) -> float:
    if x_span.end > len(ox) or y_span.end > len(oy):
        raise ValueError("pair span out of range")
    return float(ox[x_span.start:x_span.end].sum() + oy[y_span.start:y_span.end].sum())


# -- evidence -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SentenceEvidence:
    """Parameter-independent inputs of the constraint functions for one sentence."""

    pairs: tuple
    X: np.ndarray
    Y: np.ndarray
    Vx: np.ndarray
    Vy: np.ndarray
    offset: int = 0
    # per kind: (coef_x, coef_y) with coef[i] = sum of mu over pairs covering token i
    coefs: dict = field(default_factory=dict)


def _coefs(pairs, m, n, offset):
    a, b = np.zeros(m), np.zeros(n)
    for p in pairs:
        ys = p.y.span.shift(-offset)
        if p.x.span.end > m or ys.end > n or ys.start < 0:
            raise ValueError("pair span inconsistent with sequence lengths")
        a[p.x.span.start:p.x.span.end] += p.mu
        b[ys.start:ys.end] += p.mu
    return a, b


def build_evidence(question, sentence, kb: KnowledgeBase, emb: EmbeddingTable,
                   offset: int = 0, pairs=None) -> SentenceEvidence:
    if pairs is None:
        pairs = make_pairs(question, sentence, kb, offset)
    X = emb.matrix([t.text for t in question])
    Y = emb.matrix([t.text for t in sentence])
    coefs = {
        "entity": _coefs([p for p in pairs if p.kind == "entity"], len(X), len(Y), offset),
        "word": _coefs([p for p in pairs if p.kind == "word"], len(X), len(Y), offset),
    }
    return SentenceEvidence(
        pairs=tuple(pairs), X=X, Y=Y,
        Vx=emb.matrix(verb_sequence(question)), Vy=emb.matrix(verb_sequence(sentence)),
        offset=offset, coefs=coefs,
    )


# -- forward / backward -------------------------------------------------------------

def _lstm_forward(V, params: ConstraintParams):
    H = params.hidden
    h, c = np.zeros(H), np.zeros(H)
    if len(V) == 0:
        return h, []
    Wx, Uh, b = params._stacked
    steps = []
    for x in V:
        z = Wx @ x + Uh @ h + b
        i, f, o = _sigmoid(z[:H]), _sigmoid(z[H:2 * H]), _sigmoid(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((x, h, c, i, f, o, g, tc))
        h, c = o * tc, c_new
    return h, steps


def _lstm_backward(dh, steps, params: ConstraintParams, grads: dict):
    if not steps:
        return
    H = params.hidden
    _, Uh, _ = params._stacked
    dWx = np.zeros((4 * H, params.dim))
    dUh = np.zeros((4 * H, H))
    db = np.zeros(4 * H)
    dc = np.zeros(H)
    for x, h_prev, c_prev, i, f, o, g, tc in reversed(steps):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di, df, dg = dc * g, dc * c_prev, dc * i
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)])
        dWx += np.outer(dz, x)
        dUh += np.outer(dz, h_prev)
        db += dz
        dh = Uh.T @ dz
        dc = dc * f
    for k, g in enumerate(GATES):
        sl = slice(k * H, (k + 1) * H)
        grads[f"lstm.W_{g}"] += dWx[sl]
        grads[f"lstm.U_{g}"] += dUh[sl]
        grads[f"lstm.b_{g}"] += db[sl]


def _predicate_forward(Vx, Vy, params):
    hx, sx = _lstm_forward(Vx, params)
    hy, sy = _lstm_forward(Vy, params)
    z = np.concatenate([hx, hy, hx - hy, hx * hy])
    f3 = float(np.tanh(params.W3 @ z + params.b3))
    return f3, (hx, hy, sx, sy, z)


def _predicate_backward(df3, f3, cache, params, grads):
    hx, hy, sx, sy, z = cache
    H = params.hidden
    dpre = df3 * (1.0 - f3 * f3)
    grads["W3"] += dpre * z
    grads["b3"] += dpre
    dz = dpre * params.W3
    dhx = dz[:H] + dz[2 * H:3 * H] + dz[3 * H:] * hy
    dhy = dz[H:2 * H] - dz[2 * H:3 * H] + dz[3 * H:] * hx
    _lstm_backward(dhx, sx, params, grads)
    _lstm_backward(dhy, sy, params, grads)


def _pair_sum_forward(ev: SentenceEvidence, kind: str, W):
    a, b = ev.coefs[kind]
    if not a.any() and not b.any():
        return 0.0, None
    ox, oy = attention_weights(ev.X, ev.Y, W)
    return float(a @ ox + b @ oy), (ox, oy, a, b)


def _pair_sum_backward(df, ev, cache, grad):
    if cache is None or df == 0.0:
        return
    ox, oy, a, b = cache
    gx = df * ox * (a - a @ ox)
    gy = df * oy * (b - b @ oy)
    grad += np.outer(ev.Y.sum(0), ev.X.T @ gx) + np.outer(ev.X.sum(0), ev.Y.T @ gy)


def evidence_scores(ev: SentenceEvidence, params: ConstraintParams):
    """Return the constraint vector ``(f1, f2, f3)`` and a backward cache."""
    f1, c1 = _pair_sum_forward(ev, "entity", params.W1)
    f2, c2 = _pair_sum_forward(ev, "word", params.W_lexical)
    f3, c3 = _predicate_forward(ev.Vx, ev.Vy, params)
    return np.array([f1, f2, f3]), (c1, c2, c3)


def evidence_backward(ev, f, cache, df, params, grads):
    """Accumulate ``df . d f / d omega`` into ``grads``."""
    c1, c2, c3 = cache
    _pair_sum_backward(df[0], ev, c1, grads["W1"])
    _pair_sum_backward(df[1], ev, c2, grads["W1" if params.W2 is None else "W2"])
    if df[2] != 0.0:
        _predicate_backward(df[2], f[2], c3, params, grads)


def constraint_score(f, params: ConstraintParams, enabled=None) -> float:
    lam = params.lam * constraint_mask(enabled)
    return float(params.C * (lam @ np.asarray(f, dtype=np.float64)))


# -- public per-sentence API --------------------------------------------------------

def pair_sum_constraint(kind, question, sentence, pairs: Sequence[FeaturePair],
                        emb: EmbeddingTable, params: ConstraintParams, offset=0) -> float:
    pairs = list(pairs)
    if not pairs:
        return 0.0
    if any(p.kind != kind for p in pairs):
        raise ValueError(f"all pairs must be of kind {kind!r}")
    X = emb.matrix([t.text for t in question])
    Y = emb.matrix([t.text for t in sentence])
    ox, oy = attention_weights(X, Y, params.W1 if kind == "entity" else params.W_lexical)
    a, b = _coefs(pairs, len(X), len(Y), offset)
    return float(a @ ox + b @ oy)


def predicate_constraint(v_x, v_y, emb: EmbeddingTable, params: ConstraintParams) -> float:
    f3, _ = _predicate_forward(emb.matrix(list(v_x)), emb.matrix(list(v_y)), params)
    return f3


@dataclass(frozen=True, eq=False)
class ConstraintEval:
    f1: float
    f2: float
    f3: float
    pairs: tuple
    alphas: tuple
    o_x: np.ndarray
    o_y: np.ndarray
    lam: np.ndarray
    C: float
    log_h: float

    @property
    def f(self):
        return np.array([self.f1, self.f2, self.f3])


def explain_evidence(ev: SentenceEvidence, params: ConstraintParams, enabled=None) -> ConstraintEval:
    f, _ = evidence_scores(ev, params)
    ox, oy = attention_weights(ev.X, ev.Y, params.W1)
    ox2, oy2 = (ox, oy) if params.W2 is None else attention_weights(ev.X, ev.Y, params.W2)
    alphas = []
    for p in ev.pairs:
        wx, wy = (ox, oy) if p.kind == "entity" else (ox2, oy2)
        alphas.append(pair_weight(wx, wy, p.x.span, p.y.span.shift(-ev.offset)))
    lam = params.lam * constraint_mask(enabled)
    return ConstraintEval(
        f1=float(f[0]), f2=float(f[1]), f3=float(f[2]), pairs=ev.pairs, alphas=tuple(alphas),
        o_x=ox, o_y=oy, lam=lam, C=params.C, log_h=constraint_score(f, params, enabled),
    )


def eval_sentence(question, sentence, kb, emb, params, offset=0, enabled=None) -> ConstraintEval:
    return explain_evidence(build_evidence(question, sentence, kb, emb, offset), params, enabled)


def zero_grads(params: ConstraintParams) -> dict:
    return {k: np.zeros_like(v, dtype=np.float64) for k, v in params.trainable().items()}


def evidence_mse_grads(evidences, targets, params: ConstraintParams, enabled=None):
    """Mean squared error of ``log_h`` against ``targets`` and its gradients."""
    grads = zero_grads(params)
    n = len(evidences)
    if n == 0:
        return 0.0, grads
    coef = params.C * params.lam * constraint_mask(enabled)
    loss = 0.0
    for ev, t in zip(evidences, targets):
        f, cache = evidence_scores(ev, params)
        r = float(coef @ f) - t
        loss += r * r
        evidence_backward(ev, f, cache, (2.0 * r / n) * coef, params, grads)
    return loss / n, grads


def grad_constraint_params(batch, kb, emb, params, enabled=None):
    """Loss and gradients for ``batch`` of ``(question, sentence, target)`` triples."""
    evidences, targets = [], []
    for question, sentence, target in batch:
        if target not in (1, -1, 1.0, -1.0):
            raise ValueError("targets must be +1 or -1")
        evidences.append(build_evidence(question, sentence, kb, emb))
        targets.append(float(target))
    return evidence_mse_grads(evidences, targets, params, enabled)
