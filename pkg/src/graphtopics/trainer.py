"""RMSProp training loop over epochs of subgraph mini-batches.

Each batch: encode the induced subgraph, decode the document topic rows,
score reconstruction against the documents' TF-IDF rows, draw fresh prior
samples (one per document in the batch) for the MMD term, backpropagate
and apply an RMSProp step. Fully deterministic given (corpus, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .corpus import Corpus, compute_tfidf
from .graph import build_graph, epoch_batches, sample_subgraph
from .model import ModelParams, decode, encode, init_params
from .objectives import DirichletPrior, LossBreakdown, mmd, reconstruction_loss, sample_dirichlet


class TrainingError(RuntimeError):
    """Non-finite loss or gradient; message carries the failure point."""


@dataclass
class TrainConfig:
    topics: int
    epochs: int = 100
    batch_size: int = 1000
    learning_rate: float = 0.01
    lambda_mmd: float = 1.0
    dirichlet_alpha: float = 0.1
    d1: int = 100
    h: int = 100
    leaky_slope: float = 0.01
    rmsprop_decay: float = 0.9
    rmsprop_eps: float = 1e-8
    seed: int = 0

    def validate(self):
        if self.topics < 2:
            raise ValueError(f"topics must be >= 2, got {self.topics}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        positives = {
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "lambda_mmd": self.lambda_mmd,
            "dirichlet_alpha": self.dirichlet_alpha,
            "d1": self.d1,
            "h": self.h,
            "leaky_slope": self.leaky_slope,
            "rmsprop_decay": self.rmsprop_decay,
            "rmsprop_eps": self.rmsprop_eps,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass
class OptimizerState:
    """Per-parameter squared-gradient accumulators, zero-initialized."""

    accum: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, params: ModelParams) -> "OptimizerState":
        return cls({name: np.zeros_like(p.data) for name, p in params.named_parameters()})


def rmsprop_step(params: ModelParams, grads: dict[str, np.ndarray],
                 state: OptimizerState, lr: float, rho: float, eps: float):
    """s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s) + eps)."""
    for name, p in params.named_parameters():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        s = state.accum[name]
        s *= rho
        s += (1.0 - rho) * g * g
        p.data -= lr * g / (np.sqrt(s) + eps)


@dataclass
class BatchRecord:
    epoch: int
    batch: int
    loss: LossBreakdown


@dataclass
class TrainResult:
    params: ModelParams
    history: list[BatchRecord] = field(default_factory=list)

    def epoch_mean_total(self, epoch: int) -> float:
        totals = [r.loss.total for r in self.history if r.epoch == epoch]
        return float(np.mean(totals))


ProgressSink = Callable[[BatchRecord], None]


def train(corpus: Corpus, config: TrainConfig,
          progress: ProgressSink | None = None) -> TrainResult:
    """Train on a corpus; returns final parameters and per-batch loss history."""
    config.validate()
    corpus.validate()
    if config.topics >= corpus.n_words:
        raise ValueError(
            f"topics ({config.topics}) must be < vocabulary size ({corpus.n_words})"
        )

    tfidf = compute_tfidf(corpus)
    graph = build_graph(tfidf)
    params = init_params(
        corpus.n_docs, corpus.n_words, config.topics, d1=config.d1, h=config.h,
        rng_seed=config.seed, leaky_slope=config.leaky_slope,
    )
    opt = OptimizerState.for_params(params)
    prior = DirichletPrior.symmetric(config.topics, config.dirichlet_alpha)
    # stream independent of the one init_params consumed
    rng = np.random.default_rng([config.seed, 1])

    result = TrainResult(params=params)
    for epoch in range(config.epochs):
        shuffle_seed = int(rng.integers(0, 2**63))
        batches = epoch_batches(corpus.n_docs, config.batch_size, shuffle_seed)
        if len(batches) >= 2 and len(batches[-1]) == 1:
            # a lone trailing document breaks batchnorm/MMD batch minimums
            batches[-2:] = [np.concatenate(batches[-2:])]
        for batch_index, doc_ids in enumerate(batches):
            record = _train_step(
                params, opt, prior, tfidf, graph, doc_ids, config, rng, epoch, batch_index
            )
            result.history.append(record)
            if progress is not None:
                progress(record)
    return result


def _train_step(params, opt, prior, tfidf, graph, doc_ids, config, rng,
                epoch, batch_index) -> BatchRecord:
    batch = sample_subgraph(graph, tfidf, doc_ids)
    x = tfidf.rows_dense(batch.doc_node_ids)
    n = batch.n_docs_sub

    params.zero_grad()
    with ad.Tape() as tape:
        z_hat = encode(params, batch, mode="train")
        x_hat = decode(params, z_hat, mode="train")
        rec = reconstruction_loss(x, x_hat)
        z_prior = sample_dirichlet(prior, n, rng)
        mmd_term = mmd(z_prior, z_hat)
        total = ad.add(rec, ad.mul_const(mmd_term, config.lambda_mmd))

    loss = LossBreakdown(rec=rec.item(), mmd=mmd_term.item(), lambda_mmd=config.lambda_mmd)
    if not np.isfinite(loss.total):
        raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_index}")

    ad.backward(total, tape)
    grads = {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.named_parameters()
    }
    try:
        rmsprop_step(params, grads, opt, config.learning_rate,
                     config.rmsprop_decay, config.rmsprop_eps)
    except TrainingError as e:
        raise TrainingError(f"epoch {epoch}, batch {batch_index}: {e}") from None
    if not params.all_finite():
        raise TrainingError(f"non-finite parameter at epoch {epoch}, batch {batch_index}")
    return BatchRecord(epoch=epoch, batch=batch_index, loss=loss)
