"""Encoder/decoder architecture, initialization and checkpointing."""

import numpy as np
import pytest

from graphtopics import (ConfigError, Corpus, Tape, backward, build_graph,
                         compute_tfidf, decode, encode, init_params,
                         load_checkpoint, mmd, reconstruction_loss,
                         sample_dirichlet, sample_subgraph, save_checkpoint,
                         topic_word_matrix, DirichletPrior)
from graphtopics import autodiff as ad
from graphtopics.model import BatchNormLayer, ModelParams
from graphtopics.autodiff import Tensor

from helpers import forward_oracle, toy_corpus, toy_tfidf


def full_batch(tfidf):
    graph = build_graph(tfidf)
    return sample_subgraph(graph, tfidf, np.arange(graph.n_docs))


def toy_params(seed=7):
    return init_params(3, 5, 2, d1=4, h=3, rng_seed=seed)


# ---------------------------------------------------------------------------
# initialization


def test_init_deterministic_per_seed():
    a, b = toy_params(11), toy_params(11)
    for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data)
    c = toy_params(12)
    assert np.any(c.enc_w0.data != a.enc_w0.data)


def test_init_shapes():
    p = init_params(10, 20, 3, d1=6, h=4, rng_seed=0)
    assert p.enc_w0.shape == (30, 6)
    assert p.enc_w1.shape == (6, 3)
    assert p.dec_w0.shape == (3, 4) and p.dec_b0.shape == (1, 4)
    assert p.dec_w1.shape == (4, 20) and p.dec_b1.shape == (1, 20)
    assert p.enc_bn1.gamma.shape == (1, 3)


def test_init_xavier_scale():
    p = init_params(900, 100, 2, d1=100, h=3, rng_seed=1)
    # uniform(+-sqrt(6/(fan_in+fan_out))) has stddev sqrt(2/(fan_in+fan_out))
    expected = np.sqrt(2.0 / (1000 + 100))
    assert abs(p.enc_w0.data.std() - expected) / expected < 0.1
    assert np.all(p.dec_b0.data == 0.0) and np.all(p.enc_bn0.gamma.data == 1.0)


def test_init_validation():
    with pytest.raises(ConfigError):
        init_params(3, 5, 1)
    with pytest.raises(ConfigError):
        init_params(3, 5, 2, d1=0)


# ---------------------------------------------------------------------------
# forward passes


def test_encode_rows_on_simplex():
    tfidf = toy_tfidf()
    z = encode(toy_params(), full_batch(tfidf), mode="train")
    assert z.shape == (3, 2)
    np.testing.assert_allclose(z.data.sum(axis=1), np.ones(3), atol=1e-9)
    assert np.all(z.data > 0.0)


def test_structurally_identical_docs_get_identical_topics():
    # identity input features give every node its own embedding row, so two
    # same-count documents coincide exactly once those rows are shared (the
    # rest of their graph neighborhoods is identical)
    corpus = Corpus(vocab=["a", "b", "c"],
                    docs=[{0: 2, 1: 1}, {0: 2, 1: 1}, {2: 4}])
    tfidf = compute_tfidf(corpus)
    params = init_params(3, 3, 2, d1=4, h=3, rng_seed=3)
    params.enc_w0.data[1] = params.enc_w0.data[0]
    z = encode(params, full_batch(tfidf), mode="train")
    np.testing.assert_array_equal(z.data[0], z.data[1])


def test_encode_checks_node_count():
    tfidf = toy_tfidf()
    batch = full_batch(tfidf)
    wrong = init_params(4, 5, 2, d1=4, h=3, rng_seed=0)
    with pytest.raises(ConfigError):
        encode(wrong, batch)


def test_decode_rows_sum_to_one_and_checks_k():
    params = toy_params()
    rng = np.random.default_rng(0)
    z = rng.dirichlet(np.ones(2), size=6)
    x_hat = decode(params, z, mode="eval")
    np.testing.assert_allclose(x_hat.data.sum(axis=1), np.ones(6), atol=1e-9)
    with pytest.raises(ConfigError):
        decode(params, np.ones((2, 3)) / 3)


def test_eval_mode_is_pure():
    params = toy_params()
    tfidf = toy_tfidf()
    batch = full_batch(tfidf)
    z1 = encode(params, batch, mode="eval").data
    z2 = encode(params, batch, mode="eval").data
    np.testing.assert_array_equal(z1, z2)
    x1 = decode(params, z1, mode="eval").data
    x2 = decode(params, z1, mode="eval").data
    np.testing.assert_array_equal(x1, x2)


def test_forward_matches_straight_line_oracle():
    tfidf = toy_tfidf()
    params = toy_params(19)
    batch = full_batch(tfidf)
    z = encode(params, batch, mode="train")
    x_hat = decode(params, z, mode="train")
    z_expected, x_expected = forward_oracle(toy_params(19), tfidf.matrix.toarray())
    np.testing.assert_allclose(z.data, z_expected, rtol=0, atol=1e-10)
    np.testing.assert_allclose(x_hat.data, x_expected, rtol=0, atol=1e-10)


def test_subgraph_encode_matches_oracle_on_induced_graph():
    tfidf = toy_tfidf()
    graph = build_graph(tfidf)
    params = toy_params(23)
    batch = sample_subgraph(graph, tfidf, [0, 2])
    z = encode(params, batch, mode="train")

    sub_dense = tfidf.matrix[np.array([0, 2])].toarray()
    oracle_params = toy_params(23)
    # oracle sees only the selected embedding rows, in local order
    rows = np.concatenate([[0, 2], 3 + np.arange(5)])
    oracle_params.enc_w0 = Tensor(oracle_params.enc_w0.data[rows], requires_grad=True)
    z_expected, _ = forward_oracle(oracle_params, sub_dense)
    np.testing.assert_allclose(z.data, z_expected[:2], rtol=0, atol=1e-10)


# ---------------------------------------------------------------------------
# topic extraction


def test_topic_word_matrix_rows_sum_to_one():
    matrix = topic_word_matrix(toy_params())
    assert matrix.shape == (2, 5)
    np.testing.assert_allclose(matrix.sum(axis=1), np.ones(2), atol=1e-9)


def test_topic_word_matrix_equals_per_row_decode():
    params = toy_params(5)
    matrix = topic_word_matrix(params)
    for k in range(2):
        one_hot = np.zeros((1, 2))
        one_hot[0, k] = 1.0
        row = decode(params, one_hot, mode="eval").data[0]
        np.testing.assert_allclose(matrix[k], row, rtol=0, atol=1e-12)


def test_single_topic_decode_matches():
    # K=1 params built by hand (init_params requires K >= 2)
    rng = np.random.default_rng(2)
    params = ModelParams(
        enc_w0=Tensor(rng.normal(size=(8, 4)), requires_grad=True),
        enc_bn0=BatchNormLayer.initial(4),
        enc_w1=Tensor(rng.normal(size=(4, 1)), requires_grad=True),
        enc_bn1=BatchNormLayer.initial(1),
        dec_w0=Tensor(rng.normal(size=(1, 3)), requires_grad=True),
        dec_b0=Tensor(np.zeros((1, 3)), requires_grad=True),
        dec_bn0=BatchNormLayer.initial(3),
        dec_w1=Tensor(rng.normal(size=(3, 5)), requires_grad=True),
        dec_b1=Tensor(np.zeros((1, 5)), requires_grad=True),
        n_docs=3, n_words=5, n_topics=1, d1=4, h=3,
    )
    matrix = topic_word_matrix(params)
    np.testing.assert_array_equal(
        matrix, decode(params, np.array([[1.0]]), mode="eval").data
    )


# ---------------------------------------------------------------------------
# influence propagation (2-layer receptive field), eval mode


def _eval_z(docs, vocab_size, seed=31):
    corpus = Corpus(vocab=[f"w{i}" for i in range(vocab_size)], docs=docs)
    tfidf = compute_tfidf(corpus)
    params = init_params(len(docs), vocab_size, 2, d1=4, h=3, rng_seed=seed)
    return encode(params, full_batch(tfidf), mode="eval").data


def test_count_perturbation_reaches_word_sharing_docs_only():
    # doc0 and doc1 share word 1; doc2 is in a separate component
    base = [{0: 2, 1: 1}, {1: 1, 2: 3}, {3: 2, 4: 1}]
    bumped = [{0: 2, 1: 1}, {1: 1, 2: 5}, {3: 2, 4: 1}]  # same pattern, new count
    z_base = _eval_z(base, 5)
    z_bumped = _eval_z(bumped, 5)
    assert np.max(np.abs(z_base[0] - z_bumped[0])) > 1e-12   # via shared word 1
    np.testing.assert_array_equal(z_base[2], z_bumped[2])    # disconnected


def test_gradients_flow_to_every_parameter():
    corpus = toy_corpus()
    tfidf = compute_tfidf(corpus)
    params = toy_params(13)
    batch = full_batch(tfidf)
    x = tfidf.rows_dense([0, 1, 2])
    z_prior = sample_dirichlet(DirichletPrior.symmetric(2, 0.1), 3,
                               np.random.default_rng(1))
    with Tape() as tape:
        z = encode(params, batch, mode="train")
        x_hat = decode(params, z, mode="train")
        loss = ad.add(reconstruction_loss(x, x_hat), mmd(z_prior, z))
    backward(loss, tape)
    for name, p in params.named_parameters():
        assert p.grad is not None and np.any(p.grad != 0.0), name


# ---------------------------------------------------------------------------
# checkpointing


def test_checkpoint_round_trip_bit_exact(tmp_path):
    params = toy_params(41)
    # make running stats nontrivial first
    tfidf = toy_tfidf()
    encode(params, full_batch(tfidf), mode="train")
    path = tmp_path / "ckpt"
    save_checkpoint(params, path, extra_config={"seed": 41})
    loaded, config = load_checkpoint(path)
    assert config["K"] == 2 and config["V"] == 5 and config["D"] == 3
    assert config["seed"] == 41
    for (na, pa), (_, pb) in zip(params.named_parameters(), loaded.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=na)
    for bn_a, bn_b in [(params.enc_bn0, loaded.enc_bn0),
                       (params.enc_bn1, loaded.enc_bn1),
                       (params.dec_bn0, loaded.dec_bn0)]:
        np.testing.assert_array_equal(bn_a.state.mean, bn_b.state.mean)
        np.testing.assert_array_equal(bn_a.state.var, bn_b.state.var)


def test_checkpoint_save_is_byte_deterministic(tmp_path):
    params = toy_params(43)
    p1, p2 = tmp_path / "a", tmp_path / "b"
    save_checkpoint(params, p1)
    save_checkpoint(params, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "junk"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(ConfigError):
        load_checkpoint(path)
