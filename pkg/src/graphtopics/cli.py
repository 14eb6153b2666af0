"""Command-line interface: ingest, train, topics, eval.

Exit codes: 0 success, 1 runtime failure (malformed data, non-finite
loss), 2 usage or validation error (bad flags, missing files, invalid
config). Commands never mutate their inputs; train writes all artifacts
under --out-dir and records a RunManifest sufficient to reproduce the
run bit-identically.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from .corpus import (Corpus, CorpusError, ParseError, default_vocab_path,
                     load_corpus, load_vocab, save_bow)
from .evaluation import build_cooccurrence, format_report, score_topics, top_topic_words
from .model import ConfigError, load_checkpoint, save_checkpoint, topic_word_matrix
from .trainer import TrainConfig, TrainingError, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """Invalid flags, paths or configuration; exits with code 2."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json_atomic(path: Path, payload: dict):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_corpus_checked(path, fmt: str, vocab_path=None) -> Corpus:
    _require_file(path, "corpus file")
    if fmt == "bow":
        vp = Path(vocab_path) if vocab_path else default_vocab_path(path)
        _require_file(vp, "vocabulary sidecar")
        return load_corpus(path, fmt="bow", vocab_path=vp)
    return load_corpus(path, fmt="tokens")


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    corpus = _load_corpus_checked(args.input, args.format, args.vocab)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bow(corpus, out)
    manifest = {
        "command": "ingest",
        "input": str(args.input),
        "input_sha256": _sha256(args.input),
        "format": args.format,
        "output": str(out),
        "vocab": str(default_vocab_path(out)),
        "n_words": corpus.n_words,
        "n_docs": corpus.n_docs,
        "token_count": corpus.token_count(),
    }
    _write_json_atomic(Path(str(out) + ".manifest.json"), manifest)
    print(f"V={corpus.n_words} D={corpus.n_docs} tokens={corpus.token_count()}")
    print(f"wrote {out} and {default_vocab_path(out)}")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _load_corpus_checked(args.corpus, args.format, args.vocab)
    config = TrainConfig(
        topics=args.topics, epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, lambda_mmd=args.lambda_mmd,
        dirichlet_alpha=args.alpha, d1=args.d1, h=args.hidden,
        leaky_slope=args.leaky_slope, rmsprop_decay=args.rmsprop_decay,
        rmsprop_eps=args.rmsprop_eps, seed=args.seed,
    )
    try:
        config.validate()
        if config.topics >= corpus.n_words:
            raise ValueError(
                f"topics ({config.topics}) must be < vocabulary size ({corpus.n_words})"
            )
    except ValueError as e:
        raise UsageError(str(e)) from None

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "loss_log.tsv"
    final_path = out_dir / "final"
    epoch_path = out_dir / f"ckpt_epoch{config.epochs - 1}"
    manifest_path = out_dir / "manifest.json"
    manifest = {
        "command": "train",
        "config": asdict(config),
        "corpus": str(args.corpus),
        "corpus_format": args.format,
        "corpus_sha256": _sha256(args.corpus),
        "seed": config.seed,
        "artifacts": {
            "checkpoint_final": str(final_path),
            "checkpoint_epoch": str(epoch_path),
            "loss_log": str(log_path),
        },
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }

    started = time.monotonic()
    try:
        with open(log_path, "w", encoding="utf-8") as log:
            log.write("epoch\tbatch\trec\tmmd\ttotal\n")

            def sink(record):
                loss = record.loss
                log.write(f"{record.epoch}\t{record.batch}\t"
                          f"{loss.rec:.17g}\t{loss.mmd:.17g}\t{loss.total:.17g}\n")

            result = train(corpus, config, progress=sink)
    except TrainingError as e:
        manifest.update(status="failed", error=str(e),
                        elapsed_seconds=time.monotonic() - started)
        _write_json_atomic(manifest_path, manifest)
        print(f"training failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    extra = {"seed": config.seed, "trained_epochs": config.epochs}
    save_checkpoint(result.params, epoch_path, extra_config=extra)
    save_checkpoint(result.params, final_path, extra_config=extra)
    manifest.update(status="ok", elapsed_seconds=time.monotonic() - started)
    _write_json_atomic(manifest_path, manifest)
    first = result.epoch_mean_total(0)
    last = result.epoch_mean_total(config.epochs - 1)
    print(f"trained {config.epochs} epochs; mean total loss {first:.4f} -> {last:.4f}")
    print(f"wrote {final_path}, {epoch_path}, {log_path}, {manifest_path}")
    return EXIT_OK


def _load_topics(checkpoint_path, vocab_path):
    _require_file(checkpoint_path, "checkpoint")
    _require_file(vocab_path, "vocabulary file")
    params, config = load_checkpoint(checkpoint_path)
    vocab = load_vocab(vocab_path)
    if len(vocab) != params.n_words:
        raise UsageError(
            f"vocabulary has {len(vocab)} words but checkpoint expects {params.n_words}"
        )
    return params, config, vocab


def cmd_topics(args) -> int:
    params, _, vocab = _load_topics(args.checkpoint, args.vocab)
    if args.top_n < 1 or args.top_n > params.n_words:
        raise UsageError(f"--top-n must be in [1, {params.n_words}]")
    matrix = topic_word_matrix(params)
    for k, row in enumerate(matrix):
        words = top_topic_words(row, vocab, args.top_n)
        print(f"{k}\t{' '.join(words)}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json_atomic(out_dir / "topics_manifest.json", {
            "command": "topics",
            "checkpoint": str(args.checkpoint),
            "checkpoint_sha256": _sha256(args.checkpoint),
            "vocab": str(args.vocab),
            "top_n": args.top_n,
        })
    return EXIT_OK


def cmd_eval(args) -> int:
    params, _, vocab = _load_topics(args.checkpoint, args.vocab)
    _require_file(args.reference, "reference corpus")
    if args.top_n < 2:
        raise UsageError("--top-n must be >= 2 for pairwise coherence")

    if args.reference_format == "tokens":
        text = Path(args.reference).read_text(encoding="utf-8")
        token_docs = [line.split() for line in text.splitlines() if line.split()]
        mode = "sliding"
    else:
        ref = _load_corpus_checked(args.reference, "bow", None)
        token_docs = [
            [ref.vocab[w] for w in sorted(doc) for _ in range(doc[w])] for doc in ref.docs
        ]
        mode = "document"  # bag-of-words carries no token order
    index = build_cooccurrence(token_docs, window=args.window, mode=mode)
    report = score_topics(topic_word_matrix(params), vocab, index, top_n=args.top_n)
    print(format_report(report))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json_atomic(out_dir / "eval_manifest.json", {
            "command": "eval",
            "checkpoint": str(args.checkpoint),
            "checkpoint_sha256": _sha256(args.checkpoint),
            "vocab": str(args.vocab),
            "reference": str(args.reference),
            "reference_sha256": _sha256(args.reference),
            "reference_format": args.reference_format,
            "window": args.window,
            "top_n": args.top_n,
            "mean_npmi": report.mean_npmi,
        })
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphtopics",
        description="Graph-based neural topic modeling: ingest corpora, train, "
                    "inspect topics, and score coherence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a corpus to canonical bow + vocab files")
    p.add_argument("input", help="corpus file to read")
    p.add_argument("--format", choices=["bow", "tokens"], default="tokens",
                   help="input format (default: tokens)")
    p.add_argument("--vocab", default=None, help="vocabulary sidecar for bow input "
                   "(default: <input>.vocab)")
    p.add_argument("--output", required=True, help="canonical bow file to write "
                   "(vocabulary goes to <output>.vocab)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model and write checkpoints")
    p.add_argument("corpus", help="corpus file")
    p.add_argument("--format", choices=["bow", "tokens"], default="bow",
                   help="corpus format (default: bow)")
    p.add_argument("--vocab", default=None,
                   help="vocabulary sidecar for bow corpora (default: <corpus>.vocab)")
    p.add_argument("--topics", type=int, required=True, help="number of topics K")
    p.add_argument("--epochs", type=int, default=100, help="training epochs (default 100)")
    p.add_argument("--batch-size", type=int, default=1000,
                   help="documents per subgraph batch (default 1000)")
    p.add_argument("--lr", type=float, default=0.01, help="RMSProp learning rate (default 0.01)")
    p.add_argument("--lambda-mmd", type=float, default=1.0,
                   help="weight of the MMD term (default 1.0; chosen, not prescribed)")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="symmetric Dirichlet concentration (default 0.1; chosen, not prescribed)")
    p.add_argument("--d1", type=int, default=100, help="first conv width (default 100)")
    p.add_argument("--hidden", type=int, default=100, help="decoder hidden width (default 100)")
    p.add_argument("--leaky-slope", type=float, default=0.01,
                   help="LeakyReLU negative slope (default 0.01; chosen, not prescribed)")
    p.add_argument("--rmsprop-decay", type=float, default=0.9,
                   help="RMSProp accumulator decay (default 0.9)")
    p.add_argument("--rmsprop-eps", type=float, default=1e-8,
                   help="RMSProp denominator epsilon (default 1e-8)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out-dir", required=True, help="directory for checkpoints/logs/manifest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("topics", help="print each topic's top words from a checkpoint")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("--vocab", required=True, help="vocabulary file matching the checkpoint")
    p.add_argument("--top-n", type=int, default=10, help="words per topic (default 10)")
    p.add_argument("--out-dir", default=None, help="optional directory for a run manifest")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("eval", help="score topic coherence against a reference corpus")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("--vocab", required=True, help="vocabulary file matching the checkpoint")
    p.add_argument("reference", help="reference corpus for co-occurrence statistics")
    p.add_argument("--reference-format", choices=["tokens", "bow"], default="tokens",
                   help="reference format; bow falls back to one window per document")
    p.add_argument("--window", type=int, default=10, help="sliding window size (default 10)")
    p.add_argument("--top-n", type=int, default=10, help="words per topic (default 10)")
    p.add_argument("--out-dir", default=None, help="optional directory for a run manifest")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (UsageError, CorpusError, ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, TrainingError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
