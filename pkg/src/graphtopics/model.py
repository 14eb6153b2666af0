"""Topic model architecture: 2-layer graph-conv encoder, 2-layer MLP decoder.

Input node features are the identity, folded into the first-layer weights:
with one-hot features, adjacency @ I @ W is just adjacency @ (rows of W
selected for the nodes present in the batch), so ``enc_w0`` doubles as the
node embedding table and no N x N feature matrix is ever materialized.

Layer order is conv -> LeakyReLU -> batchnorm; the encoder softmaxes the
document-node rows only (word-node rows are computed and discarded), the
decoder softmaxes over the vocabulary. Feeding the decoder an identity
matrix in eval mode yields the per-topic word distributions.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNormState, Tensor
from .graph import SubgraphBatch

CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    """Model/batch/checkpoint size mismatch."""


@dataclass
class BatchNormLayer:
    gamma: Tensor
    beta: Tensor
    state: BatchNormState

    @classmethod
    def initial(cls, width: int) -> "BatchNormLayer":
        return cls(
            gamma=Tensor(np.ones((1, width)), requires_grad=True),
            beta=Tensor(np.zeros((1, width)), requires_grad=True),
            state=BatchNormState.initial(width),
        )


@dataclass
class ModelParams:
    """Everything the optimizer updates, plus batchnorm running state."""

    enc_w0: Tensor      # (D+V, d1) embedding table / first conv weights
    enc_bn0: BatchNormLayer
    enc_w1: Tensor      # (d1, K)
    enc_bn1: BatchNormLayer
    dec_w0: Tensor      # (K, h)
    dec_b0: Tensor      # (1, h)
    dec_bn0: BatchNormLayer
    dec_w1: Tensor      # (h, V)
    dec_b1: Tensor      # (1, V)
    n_docs: int
    n_words: int
    n_topics: int
    d1: int
    h: int
    leaky_slope: float = 0.01

    @property
    def n_nodes(self) -> int:
        return self.n_docs + self.n_words

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [
            ("enc_w0", self.enc_w0),
            ("enc_bn0.gamma", self.enc_bn0.gamma),
            ("enc_bn0.beta", self.enc_bn0.beta),
            ("enc_w1", self.enc_w1),
            ("enc_bn1.gamma", self.enc_bn1.gamma),
            ("enc_bn1.beta", self.enc_bn1.beta),
            ("dec_w0", self.dec_w0),
            ("dec_b0", self.dec_b0),
            ("dec_bn0.gamma", self.dec_bn0.gamma),
            ("dec_bn0.beta", self.dec_bn0.beta),
            ("dec_w1", self.dec_w1),
            ("dec_b1", self.dec_b1),
        ]

    def zero_grad(self):
        for _, p in self.named_parameters():
            p.zero_grad()

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p.data)) for _, p in self.named_parameters())


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True)


def init_params(n_docs: int, n_words: int, n_topics: int, d1: int = 100,
                h: int = 100, rng_seed: int = 0, leaky_slope: float = 0.01) -> ModelParams:
    """Xavier-uniform weights, zero biases, identity batchnorm; seeded."""
    if n_topics < 2:
        raise ConfigError(f"topic count must be >= 2, got {n_topics}")
    if d1 < 1 or h < 1:
        raise ConfigError("layer widths must be >= 1")
    n_nodes = n_docs + n_words
    rng = np.random.default_rng(rng_seed)
    return ModelParams(
        enc_w0=_xavier(rng, n_nodes, d1),
        enc_bn0=BatchNormLayer.initial(d1),
        enc_w1=_xavier(rng, d1, n_topics),
        enc_bn1=BatchNormLayer.initial(n_topics),
        dec_w0=_xavier(rng, n_topics, h),
        dec_b0=Tensor(np.zeros((1, h)), requires_grad=True),
        dec_bn0=BatchNormLayer.initial(h),
        dec_w1=_xavier(rng, h, n_words),
        dec_b1=Tensor(np.zeros((1, n_words)), requires_grad=True),
        n_docs=n_docs,
        n_words=n_words,
        n_topics=n_topics,
        d1=d1,
        h=h,
        leaky_slope=leaky_slope,
    )


def encode(params: ModelParams, batch: SubgraphBatch, mode: str = "train") -> Tensor:
    """Document topic distributions (B, K) for a subgraph batch."""
    if batch.local_index_map.shape[0] != params.n_nodes:
        raise ConfigError(
            f"params sized for {params.n_nodes} nodes, batch graph has "
            f"{batch.local_index_map.shape[0]}"
        )
    slope = params.leaky_slope
    h0w = ad.select_rows(params.enc_w0, batch.global_row_ids())
    z1 = ad.spmm(batch.adj_norm_sub, h0w)
    h1 = ad.batch_norm(ad.leaky_relu(z1, slope), params.enc_bn0.gamma,
                       params.enc_bn0.beta, params.enc_bn0.state, mode)
    z2 = ad.spmm(batch.adj_norm_sub, ad.matmul(h1, params.enc_w1))
    h2 = ad.batch_norm(ad.leaky_relu(z2, slope), params.enc_bn1.gamma,
                       params.enc_bn1.beta, params.enc_bn1.state, mode)
    doc_rows = ad.select_rows(h2, np.arange(batch.n_docs_sub))
    return ad.softmax_rows(doc_rows)


def decode(params: ModelParams, z, mode: str = "train") -> Tensor:
    """Word distributions (B, V) from topic distributions (B, K)."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    if z.shape[1] != params.n_topics:
        raise ConfigError(f"decoder expects K={params.n_topics}, got {z.shape[1]}")
    slope = params.leaky_slope
    a0 = ad.add_bias(ad.matmul(z, params.dec_w0), params.dec_b0)
    hid = ad.batch_norm(ad.leaky_relu(a0, slope), params.dec_bn0.gamma,
                        params.dec_bn0.beta, params.dec_bn0.state, mode)
    logits = ad.add_bias(ad.matmul(hid, params.dec_w1), params.dec_b1)
    return ad.softmax_rows(logits)


def topic_word_matrix(params: ModelParams) -> np.ndarray:
    """(K, V) word distribution per topic: the decoder fed an identity matrix."""
    return decode(params, np.eye(params.n_topics), mode="eval").data


# ---------------------------------------------------------------------------
# checkpointing
#
# Custom container instead of .npz: zip archives embed per-entry timestamps,
# which would break byte-identical checkpoints for identical seeded runs.
# Layout: magic, u64 header length, JSON header (config + ordered array
# shapes), then raw little-endian float64 row-major array bytes in order.

_CKPT_MAGIC = b"GTCKPT01"


def _state_arrays(params: ModelParams) -> dict[str, np.ndarray]:
    arrays = {name: p.data for name, p in params.named_parameters()}
    for prefix, bn in (("enc_bn0", params.enc_bn0), ("enc_bn1", params.enc_bn1),
                       ("dec_bn0", params.dec_bn0)):
        arrays[f"{prefix}.running_mean"] = bn.state.mean
        arrays[f"{prefix}.running_var"] = bn.state.var
    return arrays


def save_checkpoint(params: ModelParams, path, extra_config: dict | None = None):
    """Versioned binary dump; round-trips bit-exactly through load_checkpoint."""
    config = {
        "version": CHECKPOINT_VERSION,
        "K": params.n_topics,
        "d1": params.d1,
        "h": params.h,
        "V": params.n_words,
        "D": params.n_docs,
        "leaky_slope": params.leaky_slope,
    }
    if extra_config:
        config.update(extra_config)
    arrays = _state_arrays(params)
    header = json.dumps(
        {"config": config, "arrays": {k: list(v.shape) for k, v in arrays.items()}},
        sort_keys=True,
    ).encode()
    buf = io.BytesIO()
    buf.write(_CKPT_MAGIC)
    buf.write(len(header).to_bytes(8, "little"))
    buf.write(header)
    # byte order must match the (sorted) header listing
    for key in sorted(arrays):
        buf.write(np.ascontiguousarray(arrays[key], dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Restore a checkpoint written by save_checkpoint."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != _CKPT_MAGIC:
        raise ConfigError(f"not a checkpoint file: {path}")
    hlen = int.from_bytes(blob[8:16], "little")
    meta = json.loads(blob[16:16 + hlen].decode())
    config = meta["config"]
    if config.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {config.get('version')}")

    arrays: dict[str, np.ndarray] = {}
    offset = 16 + hlen
    for name, shape in meta["arrays"].items():
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        arrays[name] = arr.reshape(shape).astype(np.float64)
        offset += count * 8

    def tensor(key):
        return Tensor(arrays[key], requires_grad=True)

    def bn(prefix):
        return BatchNormLayer(
            gamma=tensor(f"{prefix}.gamma"),
            beta=tensor(f"{prefix}.beta"),
            state=BatchNormState(mean=arrays[f"{prefix}.running_mean"].copy(),
                                 var=arrays[f"{prefix}.running_var"].copy()),
        )

    params = ModelParams(
        enc_w0=tensor("enc_w0"),
        enc_bn0=bn("enc_bn0"),
        enc_w1=tensor("enc_w1"),
        enc_bn1=bn("enc_bn1"),
        dec_w0=tensor("dec_w0"),
        dec_b0=tensor("dec_b0"),
        dec_bn0=bn("dec_bn0"),
        dec_w1=tensor("dec_w1"),
        dec_b1=tensor("dec_b1"),
        n_docs=int(config["D"]),
        n_words=int(config["V"]),
        n_topics=int(config["K"]),
        d1=int(config["d1"]),
        h=int(config["h"]),
        leaky_slope=float(config["leaky_slope"]),
    )
    return params, config
