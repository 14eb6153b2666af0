"""Shared oracles for the test suite.

Everything here is deliberately independent of the library's fast paths:
dense re-implementations, brute-force enumeration, and central finite
differences. Keep it that way - these are the reference side of every
dual-route check.
"""

import numpy as np

from graphtopics import Corpus, Tape, backward, compute_tfidf

FD_STEP = 1e-5


def rel_err(g, g_hat):
    """Elementwise |g - g_hat| / max(1, |g|, |g_hat|)."""
    g, g_hat = np.asarray(g, dtype=float), np.asarray(g_hat, dtype=float)
    scale = np.maximum.reduce([np.ones_like(g), np.abs(g), np.abs(g_hat)])
    return np.abs(g - g_hat) / scale


def fd_gradient(f, tensor, step=FD_STEP):
    """Central finite differences of scalar f() w.r.t. one tensor's entries."""
    grad = np.zeros_like(tensor.data)
    it = np.nditer(tensor.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = tensor.data[idx]
        tensor.data[idx] = orig + step
        f_plus = f()
        tensor.data[idx] = orig - step
        f_minus = f()
        tensor.data[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def check_gradients(make_loss, tensors, tol=1e-4, step=FD_STEP):
    """Analytic vs FD gradients for every tensor; returns worst rel error.

    make_loss() runs one forward pass and returns the scalar loss Tensor;
    it is re-invoked (outside any tape) for each FD probe.
    """
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = make_loss()
    backward(loss, tape)
    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = fd_gradient(lambda: make_loss().item(), t, step=step)
        err = rel_err(analytic, numeric).max()
        assert err < tol, f"gradient mismatch: rel err {err:.3e} >= {tol}"
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# dense graph / TF-IDF oracles


def tfidf_oracle(docs, n_words):
    """Literal application of the TF-IDF formula, dense."""
    n_docs = len(docs)
    df = np.zeros(n_words)
    for doc in docs:
        for w in doc:
            df[w] += 1
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    out = np.zeros((n_docs, n_words))
    for d, doc in enumerate(docs):
        for w, c in doc.items():
            out[d, w] = c * idf[w]
        out[d] /= out[d].max()
    return out


def dense_graph_oracle(tfidf_dense):
    """Materialize A, D and D^-1/2 A D^-1/2 literally."""
    b, v = tfidf_dense.shape
    n = b + v
    a = np.eye(n)
    a[:b, b:] = tfidf_dense
    a[b:, :b] = tfidf_dense.T
    deg = a.sum(axis=1)
    adj_norm = a / np.sqrt(np.outer(deg, deg))
    return a, deg, adj_norm


# ---------------------------------------------------------------------------
# straight-line forward oracle (dense, tape-free)


def bn_train_oracle(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=0)
    var = ((x - mu) ** 2).mean(axis=0)
    return gamma * (x - mu) / np.sqrt(var + eps) + beta


def leaky_oracle(x, slope):
    return np.where(x >= 0, x, slope * x)


def softmax_oracle(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward_oracle(params, tfidf_dense):
    """Full-batch encoder + decoder recomputed step by step, dense."""
    b = tfidf_dense.shape[0]
    _, _, adj = dense_graph_oracle(tfidf_dense)
    slope = params.leaky_slope

    h0w = params.enc_w0.data  # identity input features, full batch: all rows
    h1 = bn_train_oracle(leaky_oracle(adj @ h0w, slope),
                         params.enc_bn0.gamma.data, params.enc_bn0.beta.data)
    h2 = bn_train_oracle(leaky_oracle(adj @ h1 @ params.enc_w1.data, slope),
                         params.enc_bn1.gamma.data, params.enc_bn1.beta.data)
    z_hat = softmax_oracle(h2[:b])

    a0 = z_hat @ params.dec_w0.data + params.dec_b0.data
    hid = bn_train_oracle(leaky_oracle(a0, slope),
                          params.dec_bn0.gamma.data, params.dec_bn0.beta.data)
    x_hat = softmax_oracle(hid @ params.dec_w1.data + params.dec_b1.data)
    return z_hat, x_hat


# ---------------------------------------------------------------------------
# toy fixtures


def toy_corpus():
    """3 docs, 5 words; doc 2 shares word 0 with doc 0."""
    return Corpus(
        vocab=["alpha", "beta", "gamma", "delta", "edge"],
        docs=[{0: 2, 1: 1}, {1: 1, 2: 3}, {3: 2, 4: 1, 0: 1}],
    )


def toy_tfidf():
    return compute_tfidf(toy_corpus())


def random_simplex(rng, n, k):
    """Uniform (Dirichlet(1)) rows on the k-simplex."""
    g = rng.standard_gamma(1.0, size=(n, k))
    return g / g.sum(axis=1, keepdims=True)
