"""Corpus loading, vocabulary handling and max-normalized TF-IDF.

Two on-disk formats:

* ``bow``    -- header line ``"V D"``, then D lines of space-separated
  ``wordIndex:count`` pairs (UTF-8, LF). Requires a vocabulary sidecar:
  one word per line, line i is word index i. By convention the sidecar
  lives at ``<path>.vocab`` unless given explicitly.
* ``tokens`` -- one document per line, whitespace-separated tokens
  (already preprocessed). Vocabulary order is first appearance.

TF-IDF uses raw term frequency and smoothed idf
``ln((1+D)/(1+df)) + 1``, then each document row is divided by its own
maximum so every row's largest weight is exactly 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ParseError(ValueError):
    """Malformed corpus file; carries the 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class CorpusError(ValueError):
    """Corpus violates a structural invariant (sizes, empty docs, ...)."""


_BOW_PAIR = re.compile(r"^(\d+):(\d+)$")


@dataclass
class Corpus:
    """Vocabulary plus per-document sparse raw counts."""

    vocab: list[str]
    docs: list[dict[int, int]]
    doc_ids: list[str] | None = None

    def __post_init__(self):
        self.validate()

    @property
    def n_words(self) -> int:
        return len(self.vocab)

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    def validate(self):
        v, d = len(self.vocab), len(self.docs)
        if v < 2:
            raise CorpusError(f"vocabulary size must be >= 2, got {v}")
        if d < 2:
            raise CorpusError(f"document count must be >= 2, got {d}")
        if len(set(self.vocab)) != v:
            raise CorpusError("vocabulary contains duplicate words")
        if self.doc_ids is not None and len(self.doc_ids) != d:
            raise CorpusError("doc_ids length does not match document count")
        for i, doc in enumerate(self.docs):
            if not doc:
                raise CorpusError(f"document {i} is empty")
            for w, c in doc.items():
                if not 0 <= w < v:
                    raise CorpusError(f"document {i}: word index {w} out of range")
                if c <= 0:
                    raise CorpusError(f"document {i}: nonpositive count for word {w}")

    def token_count(self) -> int:
        return sum(sum(doc.values()) for doc in self.docs)


def _read_lines(path) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"corpus file not found: {p}")
    return p.read_text(encoding="utf-8").splitlines()


def load_vocab(path) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"vocabulary file not found: {p}")
    return p.read_text(encoding="utf-8").splitlines()


def default_vocab_path(corpus_path) -> Path:
    return Path(str(corpus_path) + ".vocab")


def load_corpus(path, fmt: str = "bow", vocab_path=None) -> Corpus:
    """Load a corpus file in ``bow`` or ``tokens`` format."""
    if fmt == "bow":
        return _load_bow(path, vocab_path)
    if fmt == "tokens":
        return _load_tokens(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def _load_bow(path, vocab_path=None) -> Corpus:
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, 1, "empty file, expected 'V D' header")
    head = lines[0].split()
    if len(head) != 2 or not all(t.isdigit() for t in head):
        raise ParseError(path, 1, f"expected header 'V D', got {lines[0]!r}")
    v, d = int(head[0]), int(head[1])
    if len(lines) - 1 != d:
        raise ParseError(path, len(lines), f"header declares {d} documents, found {len(lines) - 1}")

    docs: list[dict[int, int]] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise CorpusError(f"document {i - 2} is empty")
        doc: dict[int, int] = {}
        for tok in line.split():
            m = _BOW_PAIR.match(tok)
            if m is None:
                raise ParseError(path, i, f"malformed pair {tok!r}, expected 'wordIndex:count'")
            w, c = int(m.group(1)), int(m.group(2))
            if w >= v:
                raise ParseError(path, i, f"word index {w} >= vocabulary size {v}")
            if c == 0:
                raise ParseError(path, i, f"zero count for word {w}")
            if w in doc:
                raise ParseError(path, i, f"duplicate word index {w}")
            doc[w] = c
        docs.append(doc)

    vp = Path(vocab_path) if vocab_path is not None else default_vocab_path(path)
    vocab = load_vocab(vp)
    if len(vocab) != v:
        raise CorpusError(f"vocabulary file has {len(vocab)} words, header declares {v}")
    return Corpus(vocab=vocab, docs=docs)


def _load_tokens(path) -> Corpus:
    lines = _read_lines(path)
    vocab: list[str] = []
    index: dict[str, int] = {}
    docs: list[dict[int, int]] = []
    for i, line in enumerate(lines):
        toks = line.split()
        if not toks:
            raise CorpusError(f"document {i} is empty")
        doc: dict[int, int] = {}
        for t in toks:
            w = index.get(t)
            if w is None:
                w = len(vocab)
                index[t] = w
                vocab.append(t)
            doc[w] = doc.get(w, 0) + 1
        docs.append(doc)
    return Corpus(vocab=vocab, docs=docs)


def save_bow(corpus: Corpus, path, vocab_path=None):
    """Write the canonical bow file plus its vocabulary sidecar."""
    p = Path(path)
    lines = [f"{corpus.n_words} {corpus.n_docs}"]
    for doc in corpus.docs:
        lines.append(" ".join(f"{w}:{doc[w]}" for w in sorted(doc)))
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    vp = Path(vocab_path) if vocab_path is not None else default_vocab_path(p)
    vp.write_text("\n".join(corpus.vocab) + "\n", encoding="utf-8")


@dataclass
class TfidfMatrix:
    """Per-document max-normalized TF-IDF rows, stored sparse (D x V)."""

    matrix: sp.csr_matrix
    idf: np.ndarray = field(repr=False)

    @property
    def n_docs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_words(self) -> int:
        return self.matrix.shape[1]

    def row_dense(self, d: int) -> np.ndarray:
        return self.matrix[d].toarray().ravel()

    def rows_dense(self, doc_ids) -> np.ndarray:
        return self.matrix[np.asarray(doc_ids, dtype=np.intp)].toarray()


def compute_tfidf(corpus: Corpus) -> TfidfMatrix:
    """Max-normalized TF-IDF: tf * (ln((1+D)/(1+df)) + 1), row / row-max."""
    n_docs, n_words = corpus.n_docs, corpus.n_words
    df = np.zeros(n_words)
    for doc in corpus.docs:
        for w in doc:
            df[w] += 1.0
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in corpus.docs:
        words = sorted(doc)
        weights = np.array([doc[w] * idf[w] for w in words])
        weights /= weights.max()
        indices.extend(words)
        data.extend(weights)
        indptr.append(len(indices))
    matrix = sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
        shape=(n_docs, n_words),
    )
    return TfidfMatrix(matrix=matrix, idf=idf)
