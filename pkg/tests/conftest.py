import numpy as np
import pytest

from prreader.advgen import GenConfig, default_kb, synthesize_corpus, synthetic_embeddings
from prreader.corpus import AnnotatedToken, Example, Span


def toks(text):
    """``"New/NNP/GPE York/NNP/GPE is/VBZ"`` -> tuple of tokens."""
    out = []
    for item in text.split():
        parts = item.split("/")
        out.append(AnnotatedToken(parts[0], parts[1], parts[2] if len(parts) > 2 else ""))
    return tuple(out)


def example(question, passage, sentences, answer=None, subset="original", ex_id="ex"):
    q, p = toks(question), toks(passage)
    return Example(ex_id, subset, q, p, tuple(Span(*s) for s in sentences),
                   None if answer is None else Span(*answer))


@pytest.fixture(scope="session")
def kb():
    return default_kb()


@pytest.fixture(scope="session")
def small_corpus(kb):
    cfg = GenConfig(n_train=40, n_test=20, seed=3)
    train, test = synthesize_corpus(cfg, kb)
    return cfg, train, test, synthetic_embeddings(cfg, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ---------------------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    prev = _CRITERIA.get(num, (title, True))
    if rep.when == "call" or rep.failed:
        _CRITERIA[num] = (title, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}")
