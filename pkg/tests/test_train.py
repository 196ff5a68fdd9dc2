import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prreader import train as T
from prreader.basemodel import cross_entropy_grads, forward_encoded, init_base_params
from prreader.constraint import build_evidence, evidence_scores, init_constraint_params
from prreader.corpus import Span
from prreader.embedding import EmbeddingTable
from prreader.kb import KnowledgeBase
from prreader.prcore import AnswerDistribution
from prreader.train import (OptimizerState, TrainConfig, TrainTarget, adam_step, e_step,
                            finite_diff_check, lambda_gradient, load_checkpoint, m_step_omega,
                            m_step_theta, make_targets, prepare, pretrain, project_lambda,
                            save_checkpoint, train_loop, update_lambda)

from conftest import example, toks


def fast(**kw):
    base = dict(epochs_pretrain=2, epochs_joint=2, batch_size=8, lstm_hidden=4, seed=0)
    base.update(kw)
    return TrainConfig(**base)


# -- config and Adam -------------------------------------------------------------------

def test_config_validation():
    for bad in (dict(C=0), dict(beta=-1), dict(lr_theta=0), dict(enabled_constraints=("nope",))):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert TrainConfig().C == 1.0 and TrainConfig().beta == 0.005


def test_adam_zero_gradient_fixed_point():
    params = {"w": np.array([1.0, -2.0])}
    new, st_ = adam_step(params, {"w": np.zeros(2)}, OptimizerState(), 0.1)
    np.testing.assert_array_equal(new["w"], params["w"])
    assert not st_.m["w"].any() and not st_.v["w"].any() and st_.t == 1


def test_adam_descends():
    new, st_ = adam_step({"w": np.asarray(3.0)}, {"w": np.asarray(6.0)}, OptimizerState(), 0.1)
    assert new["w"] < 3.0
    # first step of Adam moves by lr regardless of gradient scale
    assert float(new["w"]) == pytest.approx(2.9, abs=1e-7)
    assert st_.m["w"].shape == () and st_.t == 1


def test_adam_errors_and_determinism():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, OptimizerState(), 0.1)

    def run():
        rng = np.random.default_rng(3)
        p, s = {"w": rng.normal(size=3)}, OptimizerState()
        for _ in range(5):
            p, s = adam_step(p, {"w": 2 * p["w"]}, s, 0.05)
        return p["w"]

    np.testing.assert_array_equal(run(), run())


# -- targets ---------------------------------------------------------------------------

def test_targets_sea_two_sentences():
    e = example("q/NN", "a/NN b/NN c/NN d/NN e/NN", [(0, 2), (2, 5)], (0, 1), subset="sea")
    tgts = make_targets([e], np.random.default_rng(0))
    assert tgts[0] == TrainTarget("ex", T.Candidate("span", Span(0, 1), 0), 1.0)
    assert tgts[1].label == -1.0 and tgts[1].candidate.sentence_index == 1
    assert Span(2, 5).contains(tgts[1].candidate.span)
    assert len(tgts) == 2


def test_targets_single_sentence():
    e = example("q/NN", "a/NN b/NN", [(0, 2)], (0, 1))
    assert [t.label for t in make_targets([e], np.random.default_rng(0))] == [1.0]


def test_targets_sda_distractor_and_unanswerable():
    e = example("q/NN", "a/NN b/NN c/NN d/NN", [(0, 2), (2, 4)], (0, 1), subset="sda")
    e = replace(e, adv_span=Span(2, 3))
    (t,) = make_targets([e], np.random.default_rng(0))
    assert t.label == -1.0 and t.candidate.sentence_index == 1
    u = replace(e, answer=None, adv_span=Span(0, 1))
    (t,) = make_targets([u], np.random.default_rng(0))
    assert t.label == -1.0 and t.candidate.span == Span(0, 1)


def test_target_label_validation():
    with pytest.raises(ValueError):
        TrainTarget("x", T.Candidate("no_answer"), 0.5)


# -- E-step ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def prepared(small_corpus_module):
    cfg, train, test, emb, kb = small_corpus_module
    return prepare(train[:12], emb, fast(), kb)


@pytest.fixture(scope="module")
def small_corpus_module():
    from prreader.advgen import GenConfig, default_kb, synthesize_corpus, synthetic_embeddings
    kb = default_kb()
    cfg = GenConfig(n_train=40, n_test=20, seed=3)
    train, test = synthesize_corpus(cfg, kb)
    return cfg, train, test, synthetic_embeddings(cfg, 8), kb


def _theta_omega(seed=0, lam=(1.0, 1.0, 1.0), dim=8):
    rng = np.random.default_rng(seed)
    theta = init_base_params(dim, rng, scale=0.3)
    omega = init_constraint_params(dim, 4, rng, lam=lam, scale=0.5)
    omega = omega.with_trainable({"W3": rng.normal(0, 1, 16), "b3": np.asarray(0.1)})
    return theta, omega


def test_e_step_identity_cases(prepared):
    theta, omega = _theta_omega()
    p = [forward_encoded(theta, pe.enc) for pe in prepared]
    for qs in (e_step(prepared, theta, omega.with_lambda([0, 0, 0]), fast()),
               e_step(prepared, theta, omega, fast(enabled_constraints=()))):
        for q, lp in zip(qs, p):
            np.testing.assert_array_equal(q.log_p, lp)


def test_e_step_sentence_ratio(prepared):
    theta, omega = _theta_omega()
    qs = e_step(prepared, theta, omega, fast())
    for pe, q in zip(prepared, qs):
        assert q.is_normalized()
        log_h = omega.C * pe.sentence_scores(omega) @ omega.lam
        ratio = q.log_p - forward_encoded(theta, pe.enc)
        shift = ratio[-1]  # no-answer is neutral
        for k in range(len(pe.example.sentences)):
            sel = pe.cand_sentence == k
            np.testing.assert_allclose(ratio[sel] - shift, log_h[k], atol=1e-10)


def test_e_step_gold_sentence_boost():
    # hand-built: one sentence scored +1, the other 0
    e = example("q/NN", "a/NN b/NN c/NN", [(0, 1), (1, 3)], (0, 1))
    pe = prepare([e], EmbeddingTable(4), fast(), KnowledgeBase.from_rows())[0]
    theta = init_base_params(4)
    p = AnswerDistribution(pe.candidates, forward_encoded(theta, pe.enc))
    log_h = np.where(pe.cand_sentence == 0, 1.0, 0.0)
    q = T.regularize(p, log_h)
    z = float(np.sum(p.probs * np.exp(log_h)))
    np.testing.assert_allclose(q.probs[pe.cand_sentence == 0], p.probs[pe.cand_sentence == 0] * np.e / z)


# -- M-steps ------------------------------------------------------------------------------

def test_theta_step_beta_zero_is_plain_nll(prepared):
    theta, omega = _theta_omega()
    qs = e_step(prepared, theta, omega, fast())
    a, _, _, _ = m_step_theta(prepared, qs, theta, OptimizerState(), fast(beta=0.0))
    # reference: mean one-hot cross-entropy gradient, one Adam step
    grads = {k: np.zeros_like(v) for k, v in theta.trainable().items()}
    n = 0
    for pe in prepared:
        if pe.gold is None:
            continue
        w = np.zeros(len(pe.candidates))
        w[pe.gold] = 1.0
        _, g = cross_entropy_grads(theta, pe.enc, w)
        for k in grads:
            grads[k] += g[k]
        n += 1
    grads = {k: v / n for k, v in grads.items()}
    ref, _ = adam_step(theta.trainable(), grads, OptimizerState(), fast().lr_theta)
    for k, v in a.trainable().items():
        np.testing.assert_array_equal(v, ref[k])


def test_theta_loss_decomposition(prepared):
    theta, omega = _theta_omega()
    qs = e_step(prepared, theta, omega, fast())
    nll, distill, _, n = T.theta_grads(prepared, theta, qs, 0.005)
    total = 0.0
    for pe, q in zip(prepared, qs):
        if pe.gold is None:
            continue
        lp = forward_encoded(theta, pe.enc)
        total += -lp[pe.gold] - 0.005 * float(q.probs @ lp)
    assert nll + 0.005 * distill == pytest.approx(total / n, rel=1e-12)


def test_theta_gradient_vanishes_at_gold_peak():
    e = example("q/NN", "a/NN b/NN", [(0, 2)], None)
    pe = prepare([e], EmbeddingTable(4), fast(), None)[0]
    theta = T.BaseParams(np.zeros((4, 4)), np.zeros((4, 4)), 40.0)
    q = AnswerDistribution(pe.candidates, forward_encoded(theta, pe.enc))
    _, _, grads, _ = T.theta_grads([pe], theta, [q], 0.005)
    assert max(float(np.max(np.abs(g))) for g in grads.values()) < 1e-15


def _evidence_items(kb, n=10, dim=6):
    emb = EmbeddingTable(dim, oov_seed=5)
    items = []
    q = toks("who/WP ruled/VBD over/IN Prussia/NNP/GPE in/IN the/DT war/NN ?/.")
    for i in range(n):
        city = "Prussia" if i % 2 == 0 else f"City{i}"
        s = toks(f"the/DT king/NN ruled/VBD over/IN {city}/NNP/GPE in/IN the/DT war/NN ./.")
        items.append((build_evidence(q, s, kb, emb), 1.0 if i % 2 == 0 else -1.0))
    return items


def test_omega_step_properties(kb):
    items = _evidence_items(kb)
    cfg = fast(lr_omega=0.05)
    omega = init_constraint_params(6, 3, np.random.default_rng(0))
    new, _, loss = m_step_omega(items, omega, OptimizerState(), cfg)
    assert new.lam is omega.lam and new.C == omega.C
    losses = [loss]
    state = OptimizerState()
    for _ in range(200):
        omega, state, loss = m_step_omega(items, omega, state, cfg)
        losses.append(loss)
    assert losses[-1] < 0.1 < losses[0]


def test_omega_single_target_initial_loss():
    ev = build_evidence(toks("he/PRP"), toks("it/PRP"), KnowledgeBase.from_rows(), EmbeddingTable(3))
    omega = init_constraint_params(3, 2, np.random.default_rng(0))
    new, _, loss = m_step_omega([(ev, 1.0)], omega, OptimizerState(), fast())
    assert loss == 1.0
    none_needed, _, loss0 = m_step_omega([], omega, OptimizerState(), fast())
    assert none_needed is omega and loss0 == 0.0


def test_lambda_gradient_logistic_case():
    F = np.array([[1.0, 0, 0], [0, 0, 0]])
    g = lambda_gradient(np.log([0.5, 0.5]), F, 0, np.array([1.0, 1.0, 1.0]), 1.0)
    q = np.e / (np.e + 1)
    assert g[0] == pytest.approx(q * (1 - q), rel=1e-12)
    assert g[0] == pytest.approx(0.1966, abs=1e-4)
    new = project_lambda([1.0, 1.0, 1.0], g, 0.1)
    assert new[0] == pytest.approx(1.0197, abs=1e-4)
    assert list(new[1:]) == [1.0, 1.0]


def test_lambda_gradient_zero_when_f_identical():
    F = np.tile([0.3, -0.2, 0.5], (4, 1))
    g = lambda_gradient(np.log([0.1, 0.2, 0.3, 0.4]), F, 2, np.ones(3), 1.0)
    np.testing.assert_allclose(g, 0.0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_lambda_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 8))
    lp = rng.normal(size=k)
    lp -= np.logaddexp.reduce(lp)
    F, lam, C, gold = rng.normal(size=(k, 3)), rng.uniform(0, 2, 3), float(rng.uniform(0.5, 2)), int(rng.integers(k))

    def q_gold(l):
        s = lp + C * F @ l
        return float(np.exp(s[gold] - np.logaddexp.reduce(s)))

    err = finite_diff_check(lambda l: (q_gold(l), lambda_gradient(lp, F, gold, l, C)), lam)
    assert err < 1e-8


def test_projection_clamps():
    np.testing.assert_array_equal(project_lambda([0.05, 1.0, 1.0], [-1.0, 0.0, 0.0], 0.1), [0.0, 1.0, 1.0])
    np.testing.assert_array_equal(project_lambda([1.0, 1.0, 1.0], [5.0, 5.0, 5.0], 0.1, [0, 1, 0]),
                                  [1.0, 1.5, 1.0])


def test_update_lambda_without_answerable_is_noop():
    e = example("q/NN", "a/NN b/NN", [(0, 2)], None, subset="sda")
    pe = prepare([e], EmbeddingTable(4), fast(), KnowledgeBase.from_rows())
    theta, omega = _theta_omega(dim=4)
    assert update_lambda(pe, theta, omega, fast()) is omega


# -- loops -----------------------------------------------------------------------------------------

def test_pretrain_behaviour(small_corpus_module):
    _, train, _, emb, _ = small_corpus_module
    cfg0 = fast(epochs_pretrain=0)
    init = init_base_params(emb.dim, np.random.default_rng([0, 2]))
    theta0 = pretrain(train, cfg0, emb)
    np.testing.assert_array_equal(theta0.Ws, init.Ws)
    cfg = fast(epochs_pretrain=5)
    a, b = pretrain(train, cfg, emb), pretrain(train, cfg, emb)
    np.testing.assert_array_equal(a.Ws, b.Ws)
    data = prepare(train, emb, cfg)
    nll = lambda th: T.theta_grads(data, th, None, 0)[0]  # noqa: E731
    assert nll(a) < nll(init)
    with pytest.raises(ValueError):
        pretrain([], cfg, emb)


def plain_supervised(corpus, emb, cfg):
    """Independent reference: minibatch Adam on one-hot gold NLL."""
    rng = np.random.default_rng([cfg.seed, 1])
    theta = init_base_params(emb.dim, np.random.default_rng([cfg.seed, 2]))
    data = prepare(corpus, emb, cfg)
    state = OptimizerState()
    trajectory = []
    for _ in range(cfg.epochs_pretrain + cfg.epochs_joint):
        order = rng.permutation(len(data))
        for i in range(0, len(data), cfg.batch_size):
            batch = [data[j] for j in order[i:i + cfg.batch_size] if data[j].gold is not None]
            grads = {k: np.zeros_like(v) for k, v in theta.trainable().items()}
            for pe in batch:
                w = np.zeros(len(pe.candidates))
                w[pe.gold] = 1.0
                _, g = cross_entropy_grads(theta, pe.enc, w)
                for k in grads:
                    grads[k] += g[k]
            if batch:
                new, state = adam_step(theta.trainable(), {k: v / len(batch) for k, v in grads.items()},
                                       state, cfg.lr_theta)
                theta = theta.with_trainable(new)
        trajectory.append(theta.Ws.copy())
    return theta, trajectory


def test_reduction_to_supervised_training(small_corpus_module):
    _, train, _, emb, kb = small_corpus_module
    cfg = fast(beta=0.0, enabled_constraints=())
    seen = []
    res = train_loop(train, kb, cfg, emb, on_epoch=lambda phase, ep, th, om: seen.append(th.Ws.copy()))
    ref, traj = plain_supervised(train, emb, cfg)
    for k, v in res.theta.trainable().items():
        np.testing.assert_array_equal(v, ref.trainable()[k])
    for a, b in zip(seen, traj):
        np.testing.assert_array_equal(a, b)
    assert all(r["omega_mse"] == 0.0 and r["distill_loss"] == 0.0 for r in res.log.rows)
    assert all((r["lambda1"], r["lambda2"], r["lambda3"]) == (1.0, 1.0, 1.0) for r in res.log.rows)


def test_train_loop_determinism_and_invariants(small_corpus_module):
    _, train, _, emb, kb = small_corpus_module
    cfg = fast(lr_lambda=5.0)
    lams = []
    qs_ok = []

    def watch(phase, ep, th, om):
        if om is not None:
            lams.append(om.lam.copy())
            qs_ok.extend(q.is_normalized() for q in e_step(prepare(train[:8], emb, cfg, kb), th, om, cfg))

    a = train_loop(train, kb, cfg, emb, on_epoch=watch)
    b = train_loop(train, kb, cfg, emb)
    assert a.log.to_tsv() == b.log.to_tsv()
    assert all(np.all(l >= 0) for l in lams) and all(qs_ok)
    for r in a.log.rows:
        assert all(math.isfinite(r[c]) for c in ("nll", "distill_loss", "omega_mse"))


def test_disabled_constraint_lambda_frozen(small_corpus_module):
    _, train, _, emb, kb = small_corpus_module
    res = train_loop(train, kb, fast(enabled_constraints=("entity",)), emb)
    assert res.lam[1] == 1.0 and res.lam[2] == 1.0


def test_training_log_format(small_corpus_module):
    _, train, _, emb, kb = small_corpus_module
    tsv = train_loop(train, kb, fast(epochs_joint=1), emb).log.to_tsv().splitlines()
    assert tsv[0].split("\t") == ["epoch", "nll", "distill_loss", "omega_mse", "lambda1", "lambda2", "lambda3"]
    assert len(tsv) == 2 and tsv[1].startswith("1\t")


def test_non_finite_loss_aborts(monkeypatch, small_corpus_module):
    _, train, _, emb, kb = small_corpus_module

    def broken(theta, enc, target):
        return float("nan"), {k: np.zeros_like(v) for k, v in theta.trainable().items()}

    monkeypatch.setattr(T, "weighted_cross_entropy", broken)
    with pytest.raises(T.TrainingError, match="non-finite"):
        train_loop(train, kb, fast(), emb)


def test_finite_diff_quadratic():
    err = finite_diff_check(lambda w: (float(w[0] ** 2), np.array([2 * w[0]])), np.array([3.0]))
    assert err < 1e-9


def test_gradient_check_utility():
    report = T.gradient_check(0)
    assert "W2" in report and "na_bias" in report
    assert max(report.values()) < 1e-4


def test_checkpoint_round_trip(tmp_path, small_corpus_module):
    _, train, _, emb, kb = small_corpus_module
    cfg = fast(share_attention=False)
    res = train_loop(train[:10], kb, cfg, emb)
    path = tmp_path / "ck.json"
    save_checkpoint(path, cfg, res.theta, res.omega, emb)
    cfg2, theta, omega, ref = load_checkpoint(path)
    assert cfg2 == cfg
    np.testing.assert_array_equal(theta.Ws, res.theta.Ws)
    assert theta.na_bias == res.theta.na_bias
    for k, v in res.omega.trainable().items():
        np.testing.assert_array_equal(omega.trainable()[k], v)
    np.testing.assert_array_equal(omega.lam, res.omega.lam)
    assert ref["dim"] == emb.dim
