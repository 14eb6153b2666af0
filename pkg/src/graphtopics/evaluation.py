"""Topic extraction quality: top words and sliding-window NPMI coherence.

Co-occurrence statistics come from a user-supplied reference corpus: a
window of fixed size slides over each document (stride 1; documents
shorter than the window contribute a single whole-document window) and a
word or word pair is counted at most once per window. For bag-of-words
references with no token order, ``mode="document"`` counts each document
as one window instead.

NPMI for a pair, with p = count / total windows:

    ln((p_joint + eps) / (p_1 * p_2)) / (-ln(p_joint + eps))

defined as 0 when p_joint + eps >= 1, and with the marginal product taken
as 1 when either word never occurs (so unknown words land at -1 via the
eps path instead of dividing by zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import log

import numpy as np


@dataclass
class CooccurrenceIndex:
    """Window counts: total, per word, and per unordered word pair."""

    window_count: int
    word_counts: dict[str, int]
    pair_counts: dict[tuple[str, str], int]

    def count(self, word: str) -> int:
        return self.word_counts.get(word, 0)

    def joint(self, w1: str, w2: str) -> int:
        if w1 == w2:
            return self.count(w1)
        key = (w1, w2) if w1 < w2 else (w2, w1)
        return self.pair_counts.get(key, 0)


def build_cooccurrence(reference, window: int = 10, mode: str = "sliding") -> CooccurrenceIndex:
    """Count word/pair window occurrences over token sequences."""
    if mode not in ("sliding", "document"):
        raise ValueError(f"mode must be 'sliding' or 'document', got {mode!r}")
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    docs = [list(doc) for doc in reference]
    if not any(docs):
        raise ValueError("reference corpus is empty")

    total = 0
    word_counts: dict[str, int] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    for tokens in docs:
        if not tokens:
            continue
        if mode == "document" or len(tokens) <= window:
            spans = [tokens]
        else:
            spans = [tokens[i:i + window] for i in range(len(tokens) - window + 1)]
        for span in spans:
            total += 1
            present = sorted(set(span))
            for w in present:
                word_counts[w] = word_counts.get(w, 0) + 1
            for pair in combinations(present, 2):
                pair_counts[pair] = pair_counts.get(pair, 0) + 1
    return CooccurrenceIndex(total, word_counts, pair_counts)


def npmi_pair(index: CooccurrenceIndex, w1: str, w2: str, eps: float = 1e-12) -> float:
    """Normalized PMI of a word pair in [-1, 1]; see module docstring."""
    w_total = index.window_count
    c1, c2 = index.count(w1), index.count(w2)
    p1, p2 = c1 / w_total, c2 / w_total
    pj = index.joint(w1, w2) / w_total + eps
    if pj >= 1.0:
        return 0.0
    if pj <= 0.0:
        return -1.0  # eps = 0 with a never-co-occurring pair; limit value
    marginal = p1 * p2 if c1 > 0 and c2 > 0 else 1.0
    return log(pj / marginal) / -log(pj)


@dataclass
class TopicScore:
    top_words: list[str]
    npmi: float


@dataclass
class TopicReport:
    topics: list[TopicScore]
    mean_npmi: float


def top_topic_words(topic_row: np.ndarray, vocab, top_n: int) -> list[str]:
    """Highest-weight words of one topic; ties broken by lower word index."""
    order = np.argsort(-np.asarray(topic_row), kind="stable")[:top_n]
    return [vocab[i] for i in order]


def score_topics(topics: np.ndarray, vocab, index: CooccurrenceIndex,
                 top_n: int = 10, eps: float = 1e-12) -> TopicReport:
    """Mean pairwise NPMI of each topic's top words, plus the overall mean."""
    topics = np.asarray(topics, dtype=np.float64)
    if top_n < 2:
        raise ValueError(f"top_n must be >= 2, got {top_n}")
    if top_n > topics.shape[1]:
        raise ValueError(f"top_n={top_n} exceeds vocabulary size {topics.shape[1]}")
    if topics.shape[1] != len(vocab):
        raise ValueError(f"topic width {topics.shape[1]} != vocabulary size {len(vocab)}")

    scores = []
    for row in topics:
        words = top_topic_words(row, vocab, top_n)
        pair_values = [npmi_pair(index, a, b, eps) for a, b in combinations(words, 2)]
        scores.append(TopicScore(top_words=words, npmi=float(np.mean(pair_values))))
    return TopicReport(topics=scores, mean_npmi=float(np.mean([s.npmi for s in scores])))


def format_report(report: TopicReport) -> str:
    """Tab-separated table: topic id, NPMI, top words; final row is the mean."""
    lines = ["topic\tnpmi\ttop_words"]
    for i, score in enumerate(report.topics):
        lines.append(f"{i}\t{score.npmi:.6f}\t{' '.join(score.top_words)}")
    lines.append(f"mean\t{report.mean_npmi:.6f}\t")
    return "\n".join(lines)
