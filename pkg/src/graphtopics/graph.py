"""Document-word graph construction and subgraph mini-batching.

Nodes are documents first (indices [0, D)), then words ([D, D+V)). The
adjacency has unit self-loops, TF-IDF weights on doc-word edges and no
other entries; it is stored symmetrically normalized as
D^{-1/2} A D^{-1/2}.

Full graph and subgraph go through one assembly routine, so a batch
containing every document reproduces the global normalized adjacency
bit for bit (the normalized value of an (i, j)/(j, i) pair is computed
once from the same float product, which also makes the stored matrix
exactly symmetric).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .autodiff import SparseMatrix
from .corpus import TfidfMatrix


@dataclass
class CorpusGraph:
    """Whole-corpus graph: symmetric-normalized adjacency plus degrees."""

    n_docs: int
    n_words: int
    adj_norm: SparseMatrix
    degrees: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.n_docs + self.n_words


@dataclass
class SubgraphBatch:
    """Induced subgraph over sampled documents plus all word nodes.

    ``doc_node_ids`` is sorted ascending; local node order is the sampled
    documents (in that order) followed by every word node. Degrees and
    normalization are recomputed on the induced subgraph.
    """

    doc_node_ids: np.ndarray
    adj_norm_sub: SparseMatrix
    local_index_map: np.ndarray
    n_docs_total: int
    n_words: int
    degrees: np.ndarray

    @property
    def n_docs_sub(self) -> int:
        return len(self.doc_node_ids)

    @property
    def n_nodes_sub(self) -> int:
        return self.n_docs_sub + self.n_words

    def global_row_ids(self) -> np.ndarray:
        """Global node ids in local order: sampled docs, then all words."""
        words = self.n_docs_total + np.arange(self.n_words, dtype=np.intp)
        return np.concatenate([self.doc_node_ids, words])


def _assemble(doc_rows: sp.csr_matrix):
    """Normalized adjacency + degrees for a doc-word count/weight matrix.

    doc_rows is (B, V); the result covers B doc nodes followed by V word
    nodes, with unit self-loops on every node.
    """
    b, v = doc_rows.shape
    n = b + v

    rows_doc = np.repeat(np.arange(b, dtype=np.intp), np.diff(doc_rows.indptr))
    cols_word = b + doc_rows.indices.astype(np.intp)
    weights = doc_rows.data.astype(np.float64)

    degrees = np.ones(n)
    degrees[:b] += np.asarray(doc_rows.sum(axis=1)).ravel()
    degrees[b:] += np.asarray(doc_rows.sum(axis=0)).ravel()

    # one value per unordered pair keeps the matrix exactly symmetric
    off_vals = weights / np.sqrt(degrees[rows_doc] * degrees[cols_word])
    diag = np.arange(n, dtype=np.intp)
    diag_vals = 1.0 / degrees

    rows = np.concatenate([rows_doc, cols_word, diag])
    cols = np.concatenate([cols_word, rows_doc, diag])
    vals = np.concatenate([off_vals, off_vals, diag_vals])
    adj = SparseMatrix.from_coo(rows, cols, vals, shape=(n, n))
    return adj, degrees


def build_graph(tfidf: TfidfMatrix) -> CorpusGraph:
    """Assemble the corpus graph from TF-IDF edge weights."""
    adj, degrees = _assemble(tfidf.matrix)
    return CorpusGraph(
        n_docs=tfidf.n_docs, n_words=tfidf.n_words, adj_norm=adj, degrees=degrees
    )


def sample_subgraph(graph: CorpusGraph, tfidf: TfidfMatrix, doc_ids) -> SubgraphBatch:
    """Induced subgraph over the given documents (plus all words).

    doc_ids must be distinct in-range document indices; they are sorted
    ascending for the local ordering. Deterministic in its inputs.
    """
    ids = np.asarray(doc_ids, dtype=np.intp)
    if ids.size == 0:
        raise ValueError("doc_ids must be nonempty")
    if ids.min() < 0 or ids.max() >= graph.n_docs:
        raise ValueError(f"doc_ids out of range [0, {graph.n_docs})")
    if len(np.unique(ids)) != ids.size:
        raise ValueError("doc_ids contains duplicates")
    ids = np.sort(ids)

    sub_rows = tfidf.matrix[ids]
    adj, degrees = _assemble(sub_rows)

    local = np.full(graph.n_nodes, -1, dtype=np.intp)
    local[ids] = np.arange(ids.size)
    local[graph.n_docs:] = ids.size + np.arange(graph.n_words)
    return SubgraphBatch(
        doc_node_ids=ids,
        adj_norm_sub=adj,
        local_index_map=local,
        n_docs_total=graph.n_docs,
        n_words=graph.n_words,
        degrees=degrees,
    )


def epoch_batches(n_docs: int, batch_size: int, rng_seed: int) -> list[np.ndarray]:
    """Seeded shuffle of [0, n_docs) split into ceil(D/B) chunks.

    Every document appears exactly once; the last chunk may be smaller.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.random.default_rng(rng_seed).permutation(n_docs)
    return [perm[i:i + batch_size] for i in range(0, n_docs, batch_size)]
