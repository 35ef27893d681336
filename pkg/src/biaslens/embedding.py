"""From-scratch CBOW word2vec with negative sampling, plus similarity queries.

The embedding model underlies all association metrics: 100-dimensional
vectors by default, trained by SGD on the mean-of-context objective

    loss = -log sigmoid(h . v'_target) - sum_neg log sigmoid(-h . v'_neg)

where h is the mean of the context words' input vectors.  Similarity
queries (cosine, neighbors) use input vectors only.

Training is deterministic for a fixed seed in single-threaded mode.  The
default engine is a compiled kernel; engine="reference" runs the same
schedule through the pure-Python cbow_step update (slow, used to verify
the kernel).
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernel
from .corpus import Corpus
from .errors import FormatError, OutOfVocabularyError

MODEL_MAGIC = b"BLEM"
MODEL_VERSION = 1


@dataclass
class Vocabulary:
    """Word/id table with corpus frequencies, ordered by descending count."""

    words: list[str]
    index: dict[str, int]
    counts: np.ndarray  # int64, aligned with words
    total_tokens: int  # token count after min-count filtering
    negative_table_exponent: float = 0.75

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.words == other.words
            and np.array_equal(self.counts, other.counts)
            and self.total_tokens == other.total_tokens
            and self.negative_table_exponent == other.negative_table_exponent
        )


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 1e-4
    subsample_t: float = 1e-3
    min_count: int = 5
    seed: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 < self.min_lr <= self.initial_lr):
            raise ValueError("require 0 < min_lr <= initial_lr")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EmbeddingModel:
    """Vocabulary plus input/output vector matrices (V x dim each)."""

    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    config: TrainConfig

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingModel)
            and self.vocab == other.vocab
            and self.config == other.config
            and self.input_vectors.dtype == other.input_vectors.dtype
            and np.array_equal(self.input_vectors, other.input_vectors)
            and np.array_equal(self.output_vectors, other.output_vectors)
        )

    def vector(self, word: str) -> np.ndarray:
        idx = self.vocab.index.get(word)
        if idx is None:
            raise OutOfVocabularyError(word)
        return self.input_vectors[idx]

    def fingerprint(self) -> str:
        """sha256 over config, vocab and both matrices; identifies a model."""
        digest = hashlib.sha256()
        digest.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        digest.update("\x00".join(self.vocab.words).encode("utf-8"))
        digest.update(np.ascontiguousarray(self.counts_array()).tobytes())
        digest.update(np.ascontiguousarray(self.input_vectors).tobytes())
        digest.update(np.ascontiguousarray(self.output_vectors).tobytes())
        return digest.hexdigest()

    def counts_array(self) -> np.ndarray:
        return np.asarray(self.vocab.counts, dtype=np.int64)


def build_vocab(
    corpus: Corpus,
    min_count: int,
    negative_table_exponent: float = 0.75,
) -> Vocabulary:
    """Count words and keep those with frequency >= min_count.

    Words are ordered by descending frequency, ties broken lexicographically.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter[str] = Counter()
    for _, seq in corpus.documents:
        counter.update(seq.tokens)
    retained = [(w, c) for w, c in counter.items() if c >= min_count]
    retained.sort(key=lambda wc: (-wc[1], wc[0]))
    words = [w for w, _ in retained]
    counts = np.array([c for _, c in retained], dtype=np.int64)
    return Vocabulary(
        words=words,
        index={w: i for i, w in enumerate(words)},
        counts=counts,
        total_tokens=int(counts.sum()) if len(counts) else 0,
        negative_table_exponent=negative_table_exponent,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log sigma(x) = -softplus(-x), stable on both tails
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def cbow_step(
    model: EmbeddingModel,
    context_ids: Sequence[int],
    target_id: int,
    negative_ids: Sequence[int],
    lr: float,
) -> float:
    """Apply one CBOW negative-sampling update; returns the pre-update loss.

    Mutates exactly the context rows of the input matrix and the
    target/negative rows of the output matrix by -lr * gradient.  All
    gradients are taken at the pre-update parameters; repeated ids
    accumulate additively.
    """
    vocab_size = len(model.vocab)
    ctx = np.asarray(context_ids, dtype=np.intp)
    negs = np.asarray(negative_ids, dtype=np.intp)
    if ctx.size == 0:
        raise ValueError("context must be non-empty")
    all_ids = np.concatenate((ctx, [target_id], negs))
    if all_ids.size and (all_ids.min() < 0 or all_ids.max() >= vocab_size):
        raise ValueError(f"id out of range 0..{vocab_size - 1}")
    if target_id in set(int(n) for n in negs):
        raise ValueError("target must not appear among the negatives")

    inp, out = model.input_vectors, model.output_vectors
    h = inp[ctx].astype(np.float64).mean(axis=0)
    rows = np.concatenate(([target_id], negs)).astype(np.intp)
    labels = np.zeros(rows.size, dtype=np.float64)
    labels[0] = 1.0
    out_rows = out[rows].astype(np.float64)
    scores = out_rows @ h
    # loss = -log sigma(s_target) - sum -log sigma(-s_neg)
    signed = np.where(labels > 0.5, scores, -scores)
    loss = float(-_log_sigmoid(signed).sum())

    err = _sigmoid(scores) - labels  # dL/dscore per output row
    grad_h = err @ out_rows  # dL/dh
    np.add.at(out, rows, (-lr * err[:, None] * h[None, :]).astype(out.dtype))
    np.add.at(inp, ctx, (-lr / ctx.size * grad_h).astype(inp.dtype))
    return loss


def _keep_probabilities(vocab: Vocabulary, subsample_t: float) -> np.ndarray:
    """Per-word keep probability: sqrt(t / f(w)), capped at 1; <=0 disables."""
    keep = np.ones(len(vocab), dtype=np.float64)
    if subsample_t <= 0 or vocab.total_tokens == 0:
        return keep
    freq = vocab.counts / float(vocab.total_tokens)
    frequent = freq > subsample_t
    keep[frequent] = np.sqrt(subsample_t / freq[frequent])
    return keep


def _negative_table(vocab: Vocabulary) -> np.ndarray:
    """Normalized cumulative unigram^exponent distribution for sampling."""
    weights = vocab.counts.astype(np.float64) ** vocab.negative_table_exponent
    cum = np.cumsum(weights)
    return cum / cum[-1]


def _flatten_sentences(corpus: Corpus, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray, int]:
    """Concatenate per-sentence in-vocabulary word ids.

    Returns (flat ids int32, sentence offsets int64, max sentence length).
    Empty sentences (after vocabulary filtering) are dropped.
    """
    index = vocab.index
    ids: list[int] = []
    offsets: list[int] = [0]
    max_len = 0
    for _, seq in corpus.documents:
        for sentence in seq.sentences():
            n = 0
            for tok in sentence:
                i = index.get(tok)
                if i is not None:
                    ids.append(i)
                    n += 1
            if n:
                offsets.append(len(ids))
                max_len = max(max_len, n)
    return (
        np.array(ids, dtype=np.int32),
        np.array(offsets, dtype=np.int64),
        max_len,
    )


def _train_pass_reference(
    model: EmbeddingModel,
    sentence_ids: np.ndarray,
    sentence_offsets: np.ndarray,
    keep_prob: np.ndarray,
    cum_table: np.ndarray,
    config: TrainConfig,
    processed: int,
    total_planned: int,
    state: int,
) -> tuple[float, int, int, int]:
    """Pure-Python twin of _kernel._train_pass, built on cbow_step.

    Consumes the identical splitmix64 draw schedule, so a kernel run and a
    reference run with the same seed visit the same updates.
    """
    window, negatives = config.window, config.negatives
    lr_span = config.initial_lr - config.min_lr
    loss_sum = 0.0
    n_updates = 0
    for s in range(len(sentence_offsets) - 1):
        span = sentence_ids[sentence_offsets[s]:sentence_offsets[s + 1]]
        kept: list[tuple[int, float]] = []
        for w in span:
            w = int(w)
            lr = max(config.min_lr, config.initial_lr - lr_span * (processed / total_planned))
            processed += 1
            if keep_prob[w] < 1.0:
                state, z = _kernel.splitmix64(state)
                if _kernel.uniform64(z) >= keep_prob[w]:
                    continue
            kept.append((w, lr))
        for j, (target, lr) in enumerate(kept):
            c0 = max(0, j - window)
            c1 = min(len(kept), j + window + 1)
            context = [kept[c][0] for c in range(c0, c1) if c != j]
            if not context:
                continue
            negs = []
            while len(negs) < negatives:
                state, z = _kernel.splitmix64(state)
                row = int(np.searchsorted(cum_table, _kernel.uniform64(z), side="right"))
                if row != target:
                    negs.append(row)
            loss_sum += cbow_step(model, context, target, negs, lr)
            n_updates += 1
    return loss_sum, n_updates, processed, state


def train_cbow(
    corpus: Corpus,
    config: TrainConfig | None = None,
    threads: int = 1,
    engine: str = "fast",
    loss_log: list[float] | None = None,
) -> EmbeddingModel:
    """Train a CBOW model on a corpus.

    Input vectors start uniform in [-0.5/dim, +0.5/dim] from the seeded RNG,
    output vectors at zero.  The learning rate decays linearly from
    initial_lr to min_lr over the planned updates; frequent words are
    subsampled; negatives come from the unigram^0.75 table; context windows
    are clipped at sentence boundaries.

    threads > 1 updates shared matrices without locks: faster but
    nondeterministic (documented trade-off).  Single-threaded runs are
    bitwise reproducible for a fixed seed.  loss_log, when given, receives
    the mean per-update loss of each epoch.
    """
    config = config or TrainConfig()
    if engine not in ("fast", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if engine == "reference" and threads > 1:
        raise ValueError("the reference engine is single-threaded")
    vocab = build_vocab(corpus, config.min_count)
    if len(vocab) == 0:
        raise ValueError("corpus is empty after min-count filtering")
    if len(vocab) < 2:
        raise ValueError("negative sampling needs a vocabulary of at least 2 words")
    sentence_ids, sentence_offsets, max_len = _flatten_sentences(corpus, vocab)
    if sentence_ids.size == 0:
        raise ValueError("corpus has no trainable sentences after vocabulary filtering")

    rng = np.random.default_rng(config.seed)
    input_vectors = ((rng.random((len(vocab), config.dim), dtype=np.float32) - 0.5) / config.dim).astype(np.float32)
    output_vectors = np.zeros((len(vocab), config.dim), dtype=np.float32)
    model = EmbeddingModel(vocab=vocab, input_vectors=input_vectors, output_vectors=output_vectors, config=config)

    keep_prob = _keep_probabilities(vocab, config.subsample_t)
    cum_table = _negative_table(vocab)
    total_planned = config.epochs * int(sentence_ids.size)

    if threads == 1:
        processed = 0
        state = config.seed & _kernel._MASK64
        for _ in range(config.epochs):
            if engine == "fast":
                loss_sum, n_updates, processed, nb_state = _kernel._train_pass(
                    input_vectors, output_vectors, sentence_ids, sentence_offsets,
                    keep_prob, cum_table, config.window, config.negatives,
                    config.initial_lr, config.min_lr, processed, total_planned,
                    max_len, np.uint64(state),
                )
                state = int(nb_state)
            else:
                loss_sum, n_updates, processed, state = _train_pass_reference(
                    model, sentence_ids, sentence_offsets, keep_prob, cum_table,
                    config, processed, total_planned, state,
                )
            if loss_log is not None:
                loss_log.append(loss_sum / n_updates if n_updates else float("nan"))
            _check_finite(model)
    else:
        _train_hogwild(model, sentence_ids, sentence_offsets, keep_prob, cum_table,
                       max_len, total_planned, threads, loss_log)
    return model


def _train_hogwild(model, sentence_ids, sentence_offsets, keep_prob, cum_table,
                   max_len, total_planned, threads, loss_log) -> None:
    """Lock-free parallel training: each worker owns a shard of sentences."""
    config = model.config
    n_sentences = len(sentence_offsets) - 1
    bounds = np.linspace(0, n_sentences, threads + 1, dtype=np.int64)
    shards = []
    for t in range(threads):
        lo, hi = bounds[t], bounds[t + 1]
        if lo == hi:
            continue
        ids = sentence_ids[sentence_offsets[lo]:sentence_offsets[hi]]
        offs = (sentence_offsets[lo:hi + 1] - sentence_offsets[lo]).astype(np.int64)
        shards.append((ids, offs, int(sentence_offsets[lo])))
    for epoch in range(config.epochs):
        results: list[tuple[float, int]] = [(0.0, 0)] * len(shards)

        def run(i: int, ids: np.ndarray, offs: np.ndarray, prefix: int) -> None:
            processed = epoch * int(sentence_ids.size) + prefix
            state = np.uint64((config.seed + 0x9E37 * (i + 1) + epoch) & _kernel._MASK64)
            loss_sum, n_updates, _, _ = _kernel._train_pass(
                model.input_vectors, model.output_vectors, ids, offs,
                keep_prob, cum_table, config.window, config.negatives,
                config.initial_lr, config.min_lr, processed, total_planned,
                max_len, state,
            )
            results[i] = (loss_sum, n_updates)

        workers = [
            threading.Thread(target=run, args=(i, ids, offs, prefix))
            for i, (ids, offs, prefix) in enumerate(shards)
        ]
        for w in workers:
            w.start()
        for w in workers:
            w.join()
        if loss_log is not None:
            total_loss = sum(r[0] for r in results)
            total_updates = sum(r[1] for r in results)
            loss_log.append(total_loss / total_updates if total_updates else float("nan"))
        _check_finite(model)


def _check_finite(model: EmbeddingModel) -> None:
    if not np.isfinite(model.input_vectors).all() or not np.isfinite(model.output_vectors).all():
        raise FloatingPointError("training produced non-finite vectors; lower the learning rate")


def cosine(model: EmbeddingModel, w1: str, w2: str) -> float:
    """Cosine similarity of the two words' input vectors, in [-1, 1]."""
    v1 = model.vector(w1).astype(np.float64)
    v2 = model.vector(w2).astype(np.float64)
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0:
        raise ValueError(f"word {w1!r} has a zero vector")
    if n2 == 0.0:
        raise ValueError(f"word {w2!r} has a zero vector")
    return float(np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0))


def neighbors(model: EmbeddingModel, word: str, k: int) -> list[tuple[str, float]]:
    """Top k words by cosine similarity to `word`, excluding the word itself.

    Descending similarity; exact ties broken lexicographically.  Words with
    zero vectors rank last.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    idx = model.vocab.index.get(word)
    if idx is None:
        raise OutOfVocabularyError(word)
    if k == 0:
        return []
    matrix = model.input_vectors.astype(np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if norms[idx] == 0.0:
        raise ValueError(f"word {word!r} has a zero vector")
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (matrix @ matrix[idx]) / (norms * norms[idx])
    sims[norms == 0.0] = -np.inf
    candidates = [(model.vocab.words[i], float(sims[i])) for i in range(len(sims)) if i != idx]
    candidates.sort(key=lambda ws: (-ws[1], ws[0]))
    return candidates[:k]


def save_model(model: EmbeddingModel, path: str | Path) -> None:
    """Write the versioned binary model file (lossless for float32 models).

    Layout: magic, version u32, length-prefixed JSON header, then per word
    a length-prefixed UTF-8 string and a u64 count, then both matrices as
    little-endian float32, row-major.
    """
    path = Path(path)
    vocab = model.vocab
    header = {
        "dim": model.config.dim,
        "vocab_size": len(vocab),
        "total_tokens": vocab.total_tokens,
        "negative_table_exponent": vocab.negative_table_exponent,
        "config": model.config.to_dict(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for word, count in zip(vocab.words, vocab.counts):
            encoded = word.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", int(count)))
        fh.write(np.ascontiguousarray(model.input_vectors, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.output_vectors, dtype="<f4").tobytes())


def load_model(path: str | Path) -> EmbeddingModel:
    """Load a model written by save_model; FormatError on any corruption."""
    path = Path(path)
    blob = path.read_bytes()
    view = memoryview(blob)
    if len(view) < 12 or bytes(view[:4]) != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (magic mismatch)")
    (version,) = struct.unpack("<I", view[4:8])
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    (header_len,) = struct.unpack("<I", view[8:12])
    pos = 12
    if pos + header_len > len(view):
        raise FormatError(f"{path}: truncated model file")
    try:
        header = json.loads(bytes(view[pos:pos + header_len]))
        config = TrainConfig(**header["config"])
        dim = int(header["dim"])
        vocab_size = int(header["vocab_size"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed model header") from exc
    pos += header_len

    words: list[str] = []
    counts = np.empty(vocab_size, dtype=np.int64)
    try:
        for i in range(vocab_size):
            (wlen,) = struct.unpack_from("<I", view, pos)
            pos += 4
            words.append(bytes(view[pos:pos + wlen]).decode("utf-8"))
            pos += wlen
            (counts[i],) = struct.unpack_from("<Q", view, pos)
            pos += 8
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: truncated model file") from exc

    matrix_bytes = vocab_size * dim * 4
    if len(view) - pos != 2 * matrix_bytes:
        raise FormatError(f"{path}: truncated model file")
    input_vectors = np.frombuffer(view[pos:pos + matrix_bytes], dtype="<f4").reshape(vocab_size, dim).copy()
    pos += matrix_bytes
    output_vectors = np.frombuffer(view[pos:pos + matrix_bytes], dtype="<f4").reshape(vocab_size, dim).copy()

    vocab = Vocabulary(
        words=words,
        index={w: i for i, w in enumerate(words)},
        counts=counts,
        total_tokens=int(header["total_tokens"]),
        negative_table_exponent=float(header["negative_table_exponent"]),
    )
    return EmbeddingModel(vocab=vocab, input_vectors=input_vectors, output_vectors=output_vectors, config=config)


def export_text_vectors(model: EmbeddingModel, path: str | Path) -> None:
    """Write the common text vector format: "V dim" then one word per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(model.vocab)} {model.config.dim}\n")
        for i, word in enumerate(model.vocab.words):
            values = " ".join(f"{x:.6f}" for x in model.input_vectors[i])
            fh.write(f"{word} {values}\n")
