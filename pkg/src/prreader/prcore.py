"""Answer distributions and the closed-form regularized posterior ``q ∝ p·h``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AnswerDistribution:
    candidates: tuple
    log_p: np.ndarray

    def __post_init__(self):
        if len(self.candidates) != len(self.log_p):
            raise ValueError("log_p must align with candidates")

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_p)

    def log_normalizer(self) -> float:
        return float(logsumexp(self.log_p))

    def is_normalized(self, tol=NORM_TOL) -> bool:
        return abs(self.log_normalizer()) < tol

    def argmax(self) -> int:
        # candidates are ordered (start, end) with no-answer last, so the first
        # maximum implements the tie-break: lowest start, shortest, no-answer last
        return int(np.argmax(self.log_p))


def _same_support(a, b):
    return a.candidates is b.candidates or tuple(a.candidates) == tuple(b.candidates)


def regularize(p: AnswerDistribution, log_h) -> AnswerDistribution:
    """Return ``q`` with ``log q = log p + log h - logsumexp(log p + log h)``."""
    log_h = np.asarray(log_h, dtype=np.float64)
    if log_h.shape != p.log_p.shape:
        raise ValueError("log_h must align with candidates")
    if not np.all(np.isfinite(log_h)):
        raise ValueError("log_h must be finite")
    if not log_h.any():
        return p
    s = p.log_p + log_h
    m = s.max()
    log_z = m + np.log(np.exp(s - m).sum())
    return AnswerDistribution(p.candidates, s - log_z)


def kl_divergence(q: AnswerDistribution, p: AnswerDistribution) -> float:
    if not _same_support(q, p):
        raise ValueError("distributions are over different candidates")
    qp = q.probs
    mask = qp > 0
    kl = float(np.sum(qp[mask] * (q.log_p[mask] - p.log_p[mask])))
    return max(kl, 0.0)


def expected_log_p(weights: AnswerDistribution, log_p) -> float:
    log_p = np.asarray(log_p, dtype=np.float64)
    if log_p.shape != weights.log_p.shape:
        raise ValueError("log_p must align with weights")
    w = weights.probs
    mask = w > 0
    return float(w[mask] @ log_p[mask])
