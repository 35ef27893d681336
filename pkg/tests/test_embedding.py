from __future__ import annotations

import math
import random

import numpy as np
import pytest

from biaslens import (
    FormatError,
    OutOfVocabularyError,
    RawDocument,
    TrainConfig,
    build_corpus,
    build_vocab,
    cbow_step,
    cosine,
    export_text_vectors,
    load_model,
    neighbors,
    save_model,
    train_cbow,
)
from biaslens.embedding import EmbeddingModel, Vocabulary, _keep_probabilities, _negative_table

from conftest import doc_from_sentences
from oracles import brute_neighbors


def hand_model(words: list[str], vectors, out=None, dtype=np.float64, **config) -> EmbeddingModel:
    vectors = np.asarray(vectors, dtype=dtype)
    config.setdefault("dim", vectors.shape[1])
    config.setdefault("min_count", 1)
    vocab = Vocabulary(
        words=list(words),
        index={w: i for i, w in enumerate(words)},
        counts=np.arange(len(words), 0, -1, dtype=np.int64),
        total_tokens=int(np.arange(len(words), 0, -1).sum()),
    )
    out = np.zeros_like(vectors) if out is None else np.asarray(out, dtype=dtype)
    return EmbeddingModel(vocab=vocab, input_vectors=vectors, output_vectors=out, config=TrainConfig(**config))


def small_training_corpus(seed=3, n_docs=60, words=None):
    rng = random.Random(seed)
    words = words or ["she", "he", "cat", "dog", "sun", "moon", "runs", "sits"]
    docs = []
    for i in range(n_docs):
        sentences = [[rng.choice(words) for _ in range(rng.randint(4, 9))] for _ in range(3)]
        docs.append(doc_from_sentences(f"d{i}", sentences))
    return build_corpus(docs)


# ---------------------------------------------------------------- vocabulary

def test_build_vocab_min_count_filter():
    corpus = build_corpus([RawDocument("d", "a a a a a b b c")])
    vocab = build_vocab(corpus, min_count=2)
    assert vocab.words == ["a", "b"]
    assert vocab.total_tokens == 7


def test_build_vocab_empty_corpus():
    vocab = build_vocab(build_corpus([]), min_count=1)
    assert vocab.words == []
    assert vocab.total_tokens == 0


def test_build_vocab_tie_break_lexicographic():
    corpus = build_corpus([RawDocument("d", "b a b a b a")])
    vocab = build_vocab(corpus, min_count=1)
    assert vocab.words == ["a", "b"]


def test_build_vocab_orders_by_frequency():
    corpus = build_corpus([RawDocument("d", "z z z y y x")])
    assert build_vocab(corpus, min_count=1).words == ["z", "y", "x"]


# ----------------------------------------------------------------- cbow_step

def test_cbow_step_loss_at_zero_vectors():
    m = hand_model(["a", "b", "c"], np.zeros((3, 4)))
    negatives = [0, 1]
    loss = cbow_step(m, [0, 1], 2, negatives, 0.5)
    assert loss == pytest.approx((1 + len(negatives)) * math.log(2), abs=1e-12)


def test_cbow_step_zero_lr_leaves_model_unchanged():
    rng = np.random.default_rng(1)
    m = hand_model(["a", "b", "c"], rng.normal(size=(3, 4)), out=rng.normal(size=(3, 4)))
    before_in = m.input_vectors.copy()
    before_out = m.output_vectors.copy()
    loss = cbow_step(m, [0], 1, [2], 0.0)
    assert loss > 0
    assert np.array_equal(m.input_vectors, before_in)
    assert np.array_equal(m.output_vectors, before_out)


def test_cbow_step_validates_ids():
    m = hand_model(["a", "b", "c"], np.zeros((3, 4)))
    with pytest.raises(ValueError):
        cbow_step(m, [0, 7], 1, [2], 0.1)
    with pytest.raises(ValueError):
        cbow_step(m, [0], 5, [2], 0.1)
    with pytest.raises(ValueError):
        cbow_step(m, [], 1, [2], 0.1)
    with pytest.raises(ValueError):
        cbow_step(m, [0], 1, [1], 0.1)  # target among negatives


def test_cbow_step_touches_exactly_the_named_rows():
    rng = np.random.default_rng(5)
    m = hand_model(["a", "b", "c", "d", "e"], rng.normal(size=(5, 3)), out=rng.normal(size=(5, 3)))
    before_in = m.input_vectors.copy()
    before_out = m.output_vectors.copy()
    cbow_step(m, [0, 2], 4, [1], 0.3)
    changed_in = {i for i in range(5) if not np.array_equal(m.input_vectors[i], before_in[i])}
    changed_out = {i for i in range(5) if not np.array_equal(m.output_vectors[i], before_out[i])}
    assert changed_in == {0, 2}
    assert changed_out == {4, 1}


def gradient_check(seed: int) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    vocab_size = int(rng.integers(2, 11))
    dim = int(rng.integers(1, 9))
    words = [f"w{i}" for i in range(vocab_size)]
    base_in = rng.normal(0, 0.7, (vocab_size, dim))
    base_out = rng.normal(0, 0.7, (vocab_size, dim))
    n_ctx = int(rng.integers(1, 5))
    context = rng.integers(0, vocab_size, n_ctx).tolist()
    target = int(rng.integers(0, vocab_size))
    choices = [i for i in range(vocab_size) if i != target]
    n_neg = int(rng.integers(1, 4))
    negatives = rng.choice(choices, size=n_neg, replace=True).tolist()

    m = hand_model(words, base_in.copy(), out=base_out.copy())
    cbow_step(m, context, target, negatives, 1.0)
    grad_in = base_in - m.input_vectors
    grad_out = base_out - m.output_vectors

    eps = 1e-5
    worst = 0.0
    touched = [("in", i) for i in set(context)] + [("out", i) for i in {target, *negatives}]
    for which, row in touched:
        for d in range(dim):
            plus = hand_model(words, base_in.copy(), out=base_out.copy())
            minus = hand_model(words, base_in.copy(), out=base_out.copy())
            (plus.input_vectors if which == "in" else plus.output_vectors)[row, d] += eps
            (minus.input_vectors if which == "in" else minus.output_vectors)[row, d] -= eps
            fd = (cbow_step(plus, context, target, negatives, 0.0)
                  - cbow_step(minus, context, target, negatives, 0.0)) / (2 * eps)
            an = (grad_in if which == "in" else grad_out)[row, d]
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-8))
    return worst


def test_cbow_gradient_matches_finite_differences():
    for seed in range(10):
        assert gradient_check(seed) < 1e-4


# ------------------------------------------------------------------ training

def test_train_deterministic_for_fixed_seed():
    corpus = small_training_corpus()
    config = TrainConfig(dim=12, window=3, negatives=3, epochs=2, min_count=1, seed=99)
    m1 = train_cbow(corpus, config)
    m2 = train_cbow(corpus, config)
    assert m1 == m2  # bitwise


def test_train_seed_changes_model():
    corpus = small_training_corpus()
    m1 = train_cbow(corpus, TrainConfig(dim=8, epochs=1, min_count=1, seed=1))
    m2 = train_cbow(corpus, TrainConfig(dim=8, epochs=1, min_count=1, seed=2))
    assert not np.array_equal(m1.input_vectors, m2.input_vectors)


def test_train_engines_agree():
    corpus = small_training_corpus(n_docs=25)
    config = TrainConfig(dim=8, window=2, negatives=2, epochs=1, min_count=1, seed=7)
    fast = train_cbow(corpus, config, engine="fast")
    ref = train_cbow(corpus, config, engine="reference")
    # identical draw schedule; only float32-vs-float64 arithmetic differs
    np.testing.assert_allclose(fast.input_vectors, ref.input_vectors, atol=1e-5)
    np.testing.assert_allclose(fast.output_vectors, ref.output_vectors, atol=1e-5)


def test_train_initialization_contract():
    corpus = small_training_corpus(n_docs=10)
    config = TrainConfig(dim=16, epochs=1, min_count=1, seed=5, initial_lr=1e-9, min_lr=1e-9)
    model = train_cbow(corpus, config)
    # with a negligible learning rate the matrices stay at initialization
    assert np.abs(model.input_vectors).max() <= 0.5 / config.dim + 1e-7
    rng = np.random.default_rng(5)
    expected = ((rng.random((len(model.vocab), 16), dtype=np.float32) - 0.5) / 16).astype(np.float32)
    np.testing.assert_allclose(model.input_vectors, expected, atol=1e-5)


def test_train_rejects_empty_corpus():
    with pytest.raises(ValueError, match="empty"):
        train_cbow(build_corpus([]), TrainConfig(min_count=1))
    corpus = build_corpus([RawDocument("d", "rare words only once")])
    with pytest.raises(ValueError):
        train_cbow(corpus, TrainConfig(min_count=5))


def test_train_loss_decreases():
    corpus = small_training_corpus(n_docs=80)
    losses: list[float] = []
    train_cbow(corpus, TrainConfig(dim=16, window=3, negatives=3, epochs=5, min_count=1, seed=4),
               loss_log=losses)
    assert len(losses) == 5
    assert losses[-1] < losses[0]


def test_train_vectors_finite():
    corpus = small_training_corpus(n_docs=40)
    model = train_cbow(corpus, TrainConfig(dim=10, epochs=3, min_count=1, seed=2))
    assert np.isfinite(model.input_vectors).all()
    assert np.isfinite(model.output_vectors).all()


def test_train_hogwild_smoke():
    corpus = small_training_corpus(n_docs=60)
    model = train_cbow(corpus, TrainConfig(dim=8, epochs=2, min_count=1, seed=6), threads=3)
    assert np.isfinite(model.input_vectors).all()
    assert len(model.vocab) > 0


def test_train_rejects_bad_engine_combinations():
    corpus = small_training_corpus(n_docs=5)
    with pytest.raises(ValueError, match="engine"):
        train_cbow(corpus, TrainConfig(min_count=1), engine="magic")
    with pytest.raises(ValueError, match="single-threaded"):
        train_cbow(corpus, TrainConfig(min_count=1), engine="reference", threads=2)


def test_subsampling_keep_probabilities():
    words = ["common", "rare"]
    vocab = Vocabulary(words=words, index={w: i for i, w in enumerate(words)},
                       counts=np.array([900, 100]), total_tokens=1000)
    keep = _keep_probabilities(vocab, 0.5)
    assert keep[0] == pytest.approx(math.sqrt(0.5 / 0.9))
    assert keep[1] == 1.0  # below threshold: never dropped
    assert (_keep_probabilities(vocab, 0.0) == 1.0).all()


def test_negative_table_is_unigram_power():
    words = ["a", "b"]
    vocab = Vocabulary(words=words, index={"a": 0, "b": 1},
                       counts=np.array([81, 16]), total_tokens=97)
    cum = _negative_table(vocab)
    weight_a, weight_b = 81**0.75, 16**0.75
    assert cum[-1] == 1.0
    assert cum[0] == pytest.approx(weight_a / (weight_a + weight_b))


# ------------------------------------------------------------------- queries

def test_cosine_self_similarity():
    m = hand_model(["a", "b"], [[1.0, 2.0], [3.0, -1.0]])
    assert cosine(m, "a", "a") == pytest.approx(1.0, abs=1e-9)


def test_cosine_orthogonal():
    m = hand_model(["a", "b"], [[1.0, 0.0], [0.0, 2.0]])
    assert cosine(m, "a", "b") == pytest.approx(0.0, abs=1e-12)


def test_cosine_hand_value():
    m = hand_model(["a", "b"], [[1.0, 0.0], [1.0, 1.0]])
    assert cosine(m, "a", "b") == pytest.approx(0.7071, abs=1e-4)


def test_cosine_symmetric_and_scale_invariant():
    rng = np.random.default_rng(8)
    v, w = rng.normal(size=4), rng.normal(size=4)
    m = hand_model(["v", "w", "v2", "w2"], np.stack([v, w, 3.5 * v, 0.25 * w]))
    assert cosine(m, "v", "w") == pytest.approx(cosine(m, "w", "v"), abs=1e-15)
    assert cosine(m, "v2", "w2") == pytest.approx(cosine(m, "v", "w"), abs=1e-12)


def test_cosine_errors():
    m = hand_model(["a", "b"], [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(OutOfVocabularyError, match="missing"):
        cosine(m, "a", "missing")
    with pytest.raises(ValueError, match="'b'"):
        cosine(m, "a", "b")


def test_neighbors_k0_and_full():
    rng = np.random.default_rng(3)
    words = ["a", "b", "c", "d"]
    m = hand_model(words, rng.normal(size=(4, 3)))
    assert neighbors(m, "a", 0) == []
    full = neighbors(m, "a", 10)
    assert [w for w, _ in full] != []
    assert len(full) == 3
    sims = [s for _, s in full]
    assert sims == sorted(sims, reverse=True)


def test_neighbors_matches_brute_force():
    rng = np.random.default_rng(17)
    words = ["a", "b", "c", "d"]
    matrix = rng.normal(size=(4, 3))
    m = hand_model(words, matrix)
    got = neighbors(m, "b", 3)
    expected = brute_neighbors(words, matrix, "b", 3)
    assert [w for w, _ in got] == [w for w, _ in expected]
    for (_, s1), (_, s2) in zip(got, expected):
        assert s1 == pytest.approx(s2, abs=1e-12)


def test_neighbors_prefix_property():
    rng = np.random.default_rng(23)
    words = [f"w{i}" for i in range(8)]
    m = hand_model(words, rng.normal(size=(8, 5)))
    for k in range(7):
        assert neighbors(m, "w0", k) == neighbors(m, "w0", k + 1)[:k]


def test_neighbors_oov():
    m = hand_model(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(OutOfVocabularyError):
        neighbors(m, "zzz", 1)


def test_neighbors_tie_break_lexicographic():
    m = hand_model(["q", "mirror2", "mirror1"], [[1.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    got = neighbors(m, "q", 2)
    assert [w for w, _ in got] == ["mirror1", "mirror2"]


# --------------------------------------------------------------- persistence

def test_save_load_round_trip_bitwise(tmp_path):
    corpus = small_training_corpus(n_docs=20)
    model = train_cbow(corpus, TrainConfig(dim=6, epochs=1, min_count=1, seed=44))
    path = tmp_path / "model.bin"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded == model


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(FormatError, match="magic"):
        load_model(path)


def test_load_rejects_truncation(tmp_path):
    corpus = small_training_corpus(n_docs=20)
    model = train_cbow(corpus, TrainConfig(dim=6, epochs=1, min_count=1, seed=44))
    path = tmp_path / "model.bin"
    save_model(model, path)
    blob = path.read_bytes()
    for cut in (10, len(blob) // 2, len(blob) - 5):
        (tmp_path / "cut.bin").write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            load_model(tmp_path / "cut.bin")


def test_export_text_vectors(tmp_path):
    m = hand_model(["a", "b"], [[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    path = tmp_path / "vectors.txt"
    export_text_vectors(m, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "2 2"
    assert lines[1].split() == ["a", "1.000000", "2.000000"]
    assert len(lines) == 3


def test_model_fingerprint_distinguishes_models():
    m1 = hand_model(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    m2 = hand_model(["a", "b"], [[1.0, 0.0], [0.0, 2.0]])
    assert m1.fingerprint() != m2.fingerprint()
    assert m1.fingerprint() == hand_model(["a", "b"], [[1.0, 0.0], [0.0, 1.0]]).fingerprint()
