"""Posterior-regularized span reader with learnable linguistic constraints."""

from .corpus import AnnotatedToken, Candidate, Example, Span, load_corpus, dump_corpus
from .kb import KnowledgeBase, load_kb
from .embedding import EmbeddingTable
from .prcore import AnswerDistribution, regularize
from .train import TrainConfig, train_loop, pretrain
from .evalrep import EvalReport, evaluate, exact_match, f1_score
from .estimator import PRReader, check_corpus

__version__ = "0.1.0"

__all__ = [
    "AnnotatedToken", "Candidate", "Example", "Span", "load_corpus", "dump_corpus",
    "KnowledgeBase", "load_kb", "EmbeddingTable", "AnswerDistribution", "regularize",
    "TrainConfig", "train_loop", "pretrain", "EvalReport", "evaluate", "exact_match", "f1_score",
    "PRReader", "check_corpus",
]
