"""Synthetic corpora with known topic structure, for demos and validation.

Documents are generated from a Dirichlet mixture over disjoint word
blocks: each topic owns a contiguous block of the vocabulary and emits
its words uniformly. Recovering the blocks from the trained decoder is
the end-to-end sanity check for the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    token_docs: list[list[str]]
    topic_words: list[list[str]]     # per true topic, its owned words
    doc_topics: np.ndarray           # (D, K_true) mixture weights used


def make_topic_corpus(n_topics: int = 5, words_per_topic: int = 40,
                      n_docs: int = 1000, doc_len: int = 80,
                      alpha: float = 0.1, seed: int = 0) -> SyntheticCorpus:
    """Corpus of n_docs documents drawn from disjoint uniform topics."""
    rng = np.random.default_rng(seed)
    n_words = n_topics * words_per_topic
    width = len(str(n_words - 1))
    vocab = [f"w{i:0{width}d}" for i in range(n_words)]
    topic_words = [
        vocab[k * words_per_topic:(k + 1) * words_per_topic] for k in range(n_topics)
    ]

    token_docs: list[list[str]] = []
    docs: list[dict[int, int]] = []
    mixtures = rng.dirichlet(np.full(n_topics, alpha), size=n_docs)
    for d in range(n_docs):
        topics = rng.choice(n_topics, size=doc_len, p=mixtures[d])
        offsets = rng.integers(0, words_per_topic, size=doc_len)
        word_ids = topics * words_per_topic + offsets
        token_docs.append([vocab[w] for w in word_ids])
        counts: dict[int, int] = {}
        for w in word_ids:
            w = int(w)
            counts[w] = counts.get(w, 0) + 1
        docs.append(counts)

    corpus = Corpus(vocab=vocab, docs=docs)
    return SyntheticCorpus(
        corpus=corpus, token_docs=token_docs, topic_words=topic_words, doc_topics=mixtures
    )


def greedy_topic_match(learned_top_words: list[list[str]],
                       true_topic_words: list[list[str]]) -> list[tuple[int, int, int]]:
    """Greedily pair learned and true topics by top-word overlap.

    Returns (learned index, true index, overlap) triples, largest overlap
    first; each side is matched at most once.
    """
    true_sets = [set(ws) for ws in true_topic_words]
    overlaps = np.array([
        [len(set(words) & ts) for ts in true_sets] for words in learned_top_words
    ])
    pairs = []
    used_l, used_t = set(), set()
    for _ in range(min(overlaps.shape)):
        best = None
        for i in range(overlaps.shape[0]):
            if i in used_l:
                continue
            for j in range(overlaps.shape[1]):
                if j in used_t:
                    continue
                if best is None or overlaps[i, j] > overlaps[best[0], best[1]]:
                    best = (i, j)
        i, j = best
        pairs.append((i, j, int(overlaps[i, j])))
        used_l.add(i)
        used_t.add(j)
    return pairs
