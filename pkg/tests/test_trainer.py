"""RMSProp update rule and the end-to-end training loop."""

import numpy as np
import pytest

from graphtopics import (Corpus, OptimizerState, TrainConfig, TrainingError,
                         init_params, rmsprop_step, train)

from helpers import rel_err


def tiny_corpus(seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(7):
        words = rng.choice(6, size=rng.integers(2, 5), replace=False)
        docs.append({int(w): int(rng.integers(1, 5)) for w in words})
    return Corpus(vocab=[f"w{i}" for i in range(6)], docs=docs)


def tiny_config(**overrides):
    base = dict(topics=2, epochs=3, batch_size=4, d1=5, h=4, seed=3)
    base.update(overrides)
    return TrainConfig(**base)


# ---------------------------------------------------------------------------
# RMSProp


def grads_like(params, value):
    return {name: np.full_like(p.data, value) for name, p in params.named_parameters()}


def test_rmsprop_hand_values():
    params = init_params(2, 3, 2, d1=2, h=2, rng_seed=0)
    state = OptimizerState.for_params(params)
    before = params.enc_w1.data.copy()
    rmsprop_step(params, grads_like(params, 1.0), state, lr=0.01, rho=0.9, eps=1e-8)
    np.testing.assert_allclose(state.accum["enc_w1"], np.full((2, 2), 0.1), atol=1e-15)
    delta = params.enc_w1.data - before
    # s = 0.1, step = -0.01 / (sqrt(0.1) + 1e-8)
    assert rel_err(delta, np.full((2, 2), -0.03162277560168383)).max() < 1e-12


def test_rmsprop_zero_gradient_decays_accumulator():
    params = init_params(2, 3, 2, d1=2, h=2, rng_seed=0)
    state = OptimizerState.for_params(params)
    state.accum["enc_w1"][:] = 0.5
    before = params.enc_w1.data.copy()
    rmsprop_step(params, grads_like(params, 0.0), state, lr=0.01, rho=0.9, eps=1e-8)
    np.testing.assert_array_equal(params.enc_w1.data, before)
    np.testing.assert_allclose(state.accum["enc_w1"], np.full((2, 2), 0.45))


def test_rmsprop_constant_gradient_shrinks_steps():
    params = init_params(2, 3, 2, d1=2, h=2, rng_seed=1)
    state = OptimizerState.for_params(params)
    p = params.enc_w1
    v0 = p.data.copy()
    rmsprop_step(params, grads_like(params, 1.0), state, lr=0.01, rho=0.9, eps=1e-8)
    v1 = p.data.copy()
    rmsprop_step(params, grads_like(params, 1.0), state, lr=0.01, rho=0.9, eps=1e-8)
    v2 = p.data.copy()
    assert np.all(np.abs(v2 - v1) < np.abs(v1 - v0))


def test_rmsprop_rejects_non_finite_gradient():
    params = init_params(2, 3, 2, d1=2, h=2, rng_seed=0)
    state = OptimizerState.for_params(params)
    grads = grads_like(params, 1.0)
    grads["dec_w1"][0, 0] = np.nan
    with pytest.raises(TrainingError, match="dec_w1"):
        rmsprop_step(params, grads, state, lr=0.01, rho=0.9, eps=1e-8)


def test_optimizer_state_nonnegative_after_steps():
    params = init_params(2, 3, 2, d1=2, h=2, rng_seed=2)
    state = OptimizerState.for_params(params)
    rng = np.random.default_rng(0)
    for _ in range(5):
        grads = {name: rng.normal(size=p.data.shape)
                 for name, p in params.named_parameters()}
        rmsprop_step(params, grads, state, lr=0.01, rho=0.9, eps=1e-8)
    assert all(np.all(s >= 0.0) for s in state.accum.values())


# ---------------------------------------------------------------------------
# training loop


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(epochs=0).validate()
    with pytest.raises(ValueError):
        tiny_config(topics=1).validate()
    with pytest.raises(ValueError):
        tiny_config(learning_rate=0.0).validate()
    with pytest.raises(ValueError):
        train(tiny_corpus(), tiny_config(topics=6))  # K must be < V


def test_training_reduces_loss():
    result = train(tiny_corpus(), tiny_config(epochs=12, seed=5))
    assert result.epoch_mean_total(11) < result.epoch_mean_total(0)
    assert result.params.all_finite()


def test_training_deterministic():
    log_a, log_b = [], []
    res_a = train(tiny_corpus(), tiny_config(), progress=log_a.append)
    res_b = train(tiny_corpus(), tiny_config(), progress=log_b.append)
    assert len(log_a) == len(log_b) == len(res_a.history)
    for ra, rb in zip(log_a, log_b):
        assert (ra.epoch, ra.batch) == (rb.epoch, rb.batch)
        assert ra.loss.rec == rb.loss.rec
        assert ra.loss.mmd == rb.loss.mmd
    for (_, pa), (_, pb) in zip(res_a.params.named_parameters(),
                                res_b.params.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data)


def test_training_seed_changes_history():
    res_a = train(tiny_corpus(), tiny_config(seed=1))
    res_b = train(tiny_corpus(), tiny_config(seed=2))
    assert res_a.history[0].loss.total != res_b.history[0].loss.total


def test_every_document_trains_once_per_epoch():
    seen = []
    corpus = tiny_corpus()

    # count docs per batch through the loss-history structure: 7 docs,
    # batch 4 -> chunks {4, 3}; with batch 3 -> {3, 3, 1} merges to {3, 4}
    res = train(corpus, tiny_config(epochs=2, batch_size=4))
    per_epoch = {}
    for rec in res.history:
        per_epoch.setdefault(rec.epoch, 0)
        per_epoch[rec.epoch] += 1
    assert per_epoch == {0: 2, 1: 2}


def test_lone_trailing_document_merges_into_previous_batch():
    # 7 docs with batch 3 leaves a 1-doc chunk; trainer merges it so every
    # batch satisfies the batchnorm/MMD minimums but all docs still train
    res = train(tiny_corpus(), tiny_config(epochs=1, batch_size=3))
    assert len([r for r in res.history if r.epoch == 0]) == 2


def test_full_batch_config_single_step_per_epoch():
    res = train(tiny_corpus(), tiny_config(epochs=2, batch_size=100))
    assert [r.batch for r in res.history] == [0, 0]


def test_history_total_invariant():
    res = train(tiny_corpus(), tiny_config(lambda_mmd=2.5))
    for rec in res.history:
        assert rec.loss.total == rec.loss.rec + 2.5 * rec.loss.mmd
