"""scikit-learn style wrapper around the training loop."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .constraint import CONSTRAINTS
from .corpus import Example, validate_example
from .embedding import EmbeddingTable
from .evalrep import distributions, evaluate, exact_match, f1_score
from .train import TrainConfig, e_step, prepare, train_loop


def check_corpus(X, require_nonempty=True) -> list:
    """Validate a sequence of :class:`Example` and return it as a list."""
    if isinstance(X, Example):
        raise TypeError("expected a sequence of Example, got a single Example")
    X = list(X)
    if require_nonempty and not X:
        raise ValueError("corpus is empty")
    for i, e in enumerate(X):
        if not isinstance(e, Example):
            raise TypeError(f"item {i} is {type(e).__name__}, not Example")
        problems = validate_example(e)
        if problems:
            raise ValueError(f"example {e.id!r}: {'; '.join(problems)}")
    return X


def check_is_fitted(est):
    if not hasattr(est, "theta_"):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class PRReader(BaseEstimator):
    """Span reader regularized by linguistic constraints.

    ``fit(X)`` takes a list of examples (answers are read from the examples;
    ``y`` is ignored). ``predict`` returns answer token lists, with ``None``
    for a no-answer prediction. With ``constraints=()`` this is the plain
    adversarially-trained baseline.
    """

    def __init__(self, kb=None, embeddings=None, C=1.0, beta=0.005, lambda_init=(1.0, 1.0, 1.0),
                 lr_theta=0.05, lr_omega=0.01, lr_lambda=0.1, epochs_pretrain=10, epochs_joint=10,
                 batch_size=32, max_span_len=15, embed_dim=32, lstm_hidden=16, seed=0,
                 constraints=CONSTRAINTS, share_attention=True, mode="regularized_q"):
        self.kb = kb
        self.embeddings = embeddings
        self.C = C
        self.beta = beta
        self.lambda_init = lambda_init
        self.lr_theta = lr_theta
        self.lr_omega = lr_omega
        self.lr_lambda = lr_lambda
        self.epochs_pretrain = epochs_pretrain
        self.epochs_joint = epochs_joint
        self.batch_size = batch_size
        self.max_span_len = max_span_len
        self.embed_dim = embed_dim
        self.lstm_hidden = lstm_hidden
        self.seed = seed
        self.constraints = constraints
        self.share_attention = share_attention
        self.mode = mode

    def _config(self) -> TrainConfig:
        return TrainConfig(
            C=self.C, beta=self.beta, lambda_init=tuple(self.lambda_init), lr_theta=self.lr_theta,
            lr_omega=self.lr_omega, lr_lambda=self.lr_lambda, epochs_pretrain=self.epochs_pretrain,
            epochs_joint=self.epochs_joint, batch_size=self.batch_size, max_span_len=self.max_span_len,
            embed_dim=self.embed_dim, lstm_hidden=self.lstm_hidden, seed=self.seed,
            enabled_constraints=tuple(self.constraints), share_attention=self.share_attention)

    def fit(self, X, y=None):
        X = check_corpus(X)
        config = self._config()
        if config.constrained and self.kb is None:
            raise ValueError("a knowledge base is required when constraints are enabled")
        emb = self.embeddings
        if emb is None:
            emb = EmbeddingTable(config.embed_dim, oov_seed=config.seed)
        res = train_loop(X, self.kb, config, emb)
        self.config_ = config
        self.embeddings_ = emb
        self.theta_ = res.theta
        self.omega_ = res.omega
        self.lambda_ = res.omega.lam
        self.training_log_ = res.log
        return self

    def _mode(self):
        return self.mode if self.config_.constrained else "base_p"

    def predict_distributions(self, X):
        check_is_fitted(self)
        X = check_corpus(X, require_nonempty=False)
        prepared = prepare(X, self.embeddings_, self.config_, self.kb)
        if self._mode() == "base_p":
            return prepared, distributions(self.theta_, None, prepared, self.config_, "base_p")
        return prepared, e_step(prepared, self.theta_, self.omega_, self.config_)

    def predict(self, X) -> list:
        prepared, dists = self.predict_distributions(X)
        out = []
        for pe, d in zip(prepared, dists):
            c = d.candidates[d.argmax()]
            out.append(pe.example.span_texts(c.span) if c.is_span else None)
        return out

    def score(self, X, y=None) -> float:
        """Mean token F1 in ``[0, 1]``."""
        X = check_corpus(X)
        preds = self.predict(X)
        return sum(f1_score(p, e.span_texts(e.answer) if e.answer is not None else None)
                   for p, e in zip(preds, X)) / len(X)

    def exact_score(self, X) -> float:
        X = check_corpus(X)
        preds = self.predict(X)
        return sum(exact_match(p, e.span_texts(e.answer) if e.answer is not None else None)
                   for p, e in zip(preds, X)) / len(X)

    def evaluate(self, X, answerable_only=False):
        check_is_fitted(self)
        X = check_corpus(X)
        return evaluate(self.theta_, self.omega_, X, self.kb, self.config_, self.embeddings_,
                        self._mode(), answerable_only)
