"""Graph-based neural topic modeling.

A corpus becomes a document-word graph whose edges carry max-normalized
TF-IDF weights; a two-layer graph-convolution encoder infers per-document
topic distributions, an MLP decoder reconstructs the TF-IDF rows, and the
latent batch is matched to a Dirichlet prior by minimizing a kernel MMD.
Topics are read off the decoder and scored with sliding-window NPMI
coherence against a reference corpus.
"""

from .autodiff import (BatchError, BatchNormState, ShapeError, SparseMatrix,
                       Tape, Tensor, backward)
from .corpus import (Corpus, CorpusError, ParseError, TfidfMatrix,
                     compute_tfidf, load_corpus, load_vocab, save_bow)
from .evaluation import (CooccurrenceIndex, TopicReport, TopicScore,
                         build_cooccurrence, format_report, npmi_pair,
                         score_topics, top_topic_words)
from .graph import (CorpusGraph, SubgraphBatch, build_graph, epoch_batches,
                    sample_subgraph)
from .model import (ConfigError, ModelParams, decode, encode, init_params,
                    load_checkpoint, save_checkpoint, topic_word_matrix)
from .objectives import (DirichletPrior, DomainError, LossBreakdown,
                         diffusion_kernel, mmd, reconstruction_loss,
                         sample_dirichlet)
from .synthetic import SyntheticCorpus, greedy_topic_match, make_topic_corpus
from .trainer import (BatchRecord, OptimizerState, TrainConfig, TrainResult,
                      TrainingError, rmsprop_step, train)

__version__ = "0.1.0"

__all__ = [
    "BatchError", "BatchNormState", "BatchRecord", "ConfigError",
    "CooccurrenceIndex", "Corpus", "CorpusError", "CorpusGraph",
    "DirichletPrior", "DomainError", "LossBreakdown", "ModelParams",
    "OptimizerState", "ParseError", "ShapeError", "SparseMatrix",
    "SubgraphBatch", "SyntheticCorpus", "Tape", "Tensor", "TfidfMatrix",
    "TopicReport", "TopicScore", "TrainConfig", "TrainResult",
    "TrainingError", "backward", "build_cooccurrence", "build_graph",
    "compute_tfidf", "decode", "diffusion_kernel", "encode",
    "epoch_batches", "format_report", "greedy_topic_match", "init_params",
    "load_checkpoint", "load_corpus", "load_vocab", "make_topic_corpus",
    "mmd", "npmi_pair", "reconstruction_loss", "rmsprop_step", "sample_dirichlet",
    "sample_subgraph", "save_bow", "save_checkpoint", "score_topics",
    "top_topic_words", "topic_word_matrix", "train",
]
