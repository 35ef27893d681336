from __future__ import annotations

import random
from datetime import date
from pathlib import Path

import pytest

from biaslens import RawDocument, build_corpus

DATA_DIR = Path(__file__).parent / "data"

#: word pool for randomized corpora: gendered terms, modifiers, pair terms,
#: coordinators, generics, classifier members, and plain filler
RANDOM_POOL = (
    ["he", "she", "him", "her", "his", "hers", "himself", "herself"]
    + ["male", "female"]
    + ["husband", "wife", "man", "woman", "men", "women", "boy", "girl", "son", "daughter"]
    + ["and", "or", "the", "a", "of", "to"]
    + ["mankind", "humanity", "chairman", "chairperson", "statesman", "statesperson"]
    + ["doctor", "nurse", "writer", "servant", "figure", "beauty", "pride", "mind"]
    + ["house", "river", "stone", "night", "letter", "garden", "road", "voice"]
)


def doc_from_sentences(doc_id: str, sentences: list[list[str]], when: date | None = None,
                       source: str = "test") -> RawDocument:
    """Build a RawDocument whose tokenization reproduces `sentences` exactly."""
    parts = []
    for sentence in sentences:
        words = list(sentence)
        words[0] = words[0].capitalize()
        parts.append(" ".join(words))
    return RawDocument(id=doc_id, text=". ".join(parts) + ".", date=when, source=source)


def random_sentences(rng: random.Random, max_sentences: int = 25,
                     max_tokens: int = 20) -> list[list[str]]:
    return [
        [rng.choice(RANDOM_POOL) for _ in range(rng.randint(1, max_tokens))]
        for _ in range(rng.randint(1, max_sentences))
    ]


def random_corpus(seed: int, max_docs: int = 8, max_total_tokens: int = 10_000,
                  max_sentences: int = 25):
    """A randomized corpus plus the plain doc/sentence structure the oracles use."""
    rng = random.Random(seed)
    docs = []
    plain: list[list[list[str]]] = []
    total = 0
    for d in range(rng.randint(1, max_docs)):
        sentences = random_sentences(rng, max_sentences=max_sentences)
        n = sum(len(s) for s in sentences)
        if total + n > max_total_tokens:
            break
        total += n
        when = date(rng.randint(2005, 2020), 1, 1) if rng.random() < 0.8 else None
        docs.append(doc_from_sentences(f"doc-{d}", sentences, when))
        plain.append(sentences)
    corpus = build_corpus(docs)
    # the generated text must tokenize back to the generated sentences,
    # otherwise oracle and implementation would see different data
    rebuilt = [[list(s) for s in seq.sentences()] for _, seq in corpus.documents]
    assert rebuilt == plain
    return corpus, plain


@pytest.fixture
def fixture_corpus_path() -> Path:
    return DATA_DIR / "fixture_corpus.jsonl"


@pytest.fixture
def fixture_config_path() -> Path:
    return DATA_DIR / "fixture_config.json"
