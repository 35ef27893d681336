"""Lexicons: gender seed sets, General Inquirer import, embedding expansion.

A lexicon is a named, categorized set of lowercase words with per-word
provenance ("seed", "inquirer", or "expanded:<similarity>").  The General
Inquirer dictionary itself is not bundled (licensing); load_inquirer reads
the documented TSV schema and the test suite ships small synthetic
fixtures.  Starter classifier lexicons for the premodification metric
(occupation / characteristic / physical) are bundled as editable TSV files
under biaslens/data/.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .acquisition import LoadStats
from .embedding import EmbeddingModel, neighbors
from .errors import FormatError

logger = logging.getLogger(__name__)

CATEGORIES = (
    "gender-male",
    "gender-female",
    "emotion",
    "family",
    "action",
    "vice",
    "occupation",
    "characteristic",
    "physical",
    "custom",
)

PROVENANCE_SEED = "seed"
PROVENANCE_INQUIRER = "inquirer"


def expanded_provenance(similarity: float) -> str:
    return f"expanded:{similarity:.6f}"


@dataclass
class Lexicon:
    """A named, categorized word set; all words lowercase."""

    name: str
    category: str
    words: set[str] = field(default_factory=set)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")
        self.words = {w.lower() for w in self.words}
        if not self.provenance:
            self.provenance = {w: PROVENANCE_SEED for w in self.words}
        missing = self.words - self.provenance.keys()
        if missing:
            raise ValueError(f"provenance missing for: {sorted(missing)[:5]}")

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, name: str, category: str, words: Iterable[str],
                   provenance_tag: str = PROVENANCE_SEED) -> "Lexicon":
        words = {w.lower() for w in words}
        return cls(name=name, category=category, words=words,
                   provenance={w: provenance_tag for w in words})


MALE_PRONOUNS = ("he", "him", "his", "himself")
FEMALE_PRONOUNS = ("she", "her", "hers", "herself")

MALE_NOUNS = (
    "man", "men", "boy", "boys", "husband", "husbands", "son", "sons",
    "father", "fathers", "brother", "brothers", "gentleman", "gentlemen",
    "king", "kings", "sir", "mr",
)
FEMALE_NOUNS = (
    "woman", "women", "girl", "girls", "wife", "wives", "daughter",
    "daughters", "mother", "mothers", "sister", "sisters", "lady", "ladies",
    "queen", "queens", "madam", "mrs",
)


def builtin_gender_lexicons() -> tuple[Lexicon, Lexicon]:
    """Default male/female pronoun lexicons used by the presence metric."""
    male = Lexicon.from_words("male-pronouns", "gender-male", MALE_PRONOUNS)
    female = Lexicon.from_words("female-pronouns", "gender-female", FEMALE_PRONOUNS)
    return male, female


def builtin_gender_noun_lexicons() -> tuple[Lexicon, Lexicon]:
    """Gendered person-noun lexicons for association and binomial metrics."""
    male = Lexicon.from_words("male-nouns", "gender-male", MALE_NOUNS)
    female = Lexicon.from_words("female-nouns", "gender-female", FEMALE_NOUNS)
    return male, female


def association_anchor_lexicons() -> tuple[Lexicon, Lexicon]:
    """Default association anchors: the singletons {men} and {women}."""
    male = Lexicon.from_words("male-anchor", "gender-male", ["men"])
    female = Lexicon.from_words("female-anchor", "gender-female", ["women"])
    return male, female


@dataclass(frozen=True)
class GenericsPairTable:
    """(male-marked generic, gender-neutral counterpart) pairs."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for marked, neutral in self.pairs:
            for w in (marked, neutral):
                if w in seen:
                    raise ValueError(f"word appears in two generics pairs: {w!r}")
                seen.add(w)


DEFAULT_GENERICS_PAIRS = GenericsPairTable(pairs=(
    ("mankind", "humanity"),
    ("chairman", "chairperson"),
    ("statesman", "statesperson"),
    ("spokesman", "spokesperson"),
    ("fireman", "firefighter"),
))

#: (male term, female term) pairs for the binomial-ordering metric.
DEFAULT_BINOMIAL_PAIRS: tuple[tuple[str, str], ...] = (
    ("husband", "wife"),
    ("boy", "girl"),
    ("son", "daughter"),
    ("man", "woman"),
    ("men", "women"),
)


def load_inquirer(
    path: str | Path,
    categories: Iterable[str],
    strict: bool = True,
    stats: LoadStats | None = None,
) -> list[Lexicon]:
    """Load category lexicons from a General Inquirer style TSV.

    Expected schema: a header row, then one `word<TAB>category` row per
    tagged sense.  Sense suffixes ("happy#1") are stripped and duplicates
    merged; a word tagged in two requested categories appears in both
    lexicons.  Requesting an unknown category raises ValueError listing the
    categories available in the file.
    """
    path = Path(path)
    requested = [c.lower() for c in categories]
    by_category: dict[str, set[str]] = {}
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty lexicon file")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2 or not row[0].strip() or not row[1].strip():
                if strict:
                    raise FormatError(f"{path}:{lineno}: expected word<TAB>category")
                if stats is not None:
                    stats.record(f"{path}:{lineno}", "malformed inquirer row")
                continue
            word = row[0].strip().lower().split("#", 1)[0]
            tag = row[1].strip().lower()
            by_category.setdefault(tag, set()).add(word)

    unknown = [c for c in requested if c not in by_category]
    if unknown:
        available = ", ".join(sorted(by_category))
        raise ValueError(f"unknown categories {unknown}; file provides: {available}")

    lexicons = []
    for cat in requested:
        category = cat if cat in CATEGORIES else "custom"
        lexicons.append(
            Lexicon.from_words(cat, category, by_category[cat], provenance_tag=PROVENANCE_INQUIRER)
        )
    return lexicons


def expand(
    seed: Lexicon,
    model: EmbeddingModel,
    per_word_k: int,
    min_similarity: float,
) -> Lexicon:
    """Grow a seed lexicon with embedding-space nearest neighbors.

    For each in-vocabulary seed word, its top per_word_k neighbors with
    similarity >= min_similarity join the result; provenance records the
    similarity (the maximum, when a word is reached from several seeds).
    Seed words keep their provenance, including seeds absent from the
    vocabulary, which are carried through with a logged warning.
    """
    if per_word_k < 0:
        raise ValueError("per_word_k must be >= 0")
    if not (-1.0 <= min_similarity <= 1.0):
        raise ValueError("min_similarity must be in [-1, 1]")
    words = set(seed.words)
    provenance = dict(seed.provenance)
    best: dict[str, float] = {}
    oov = sorted(w for w in seed.words if w not in model.vocab.index)
    if oov:
        logger.warning("expand(%s): %d seed words not in vocabulary: %s",
                       seed.name, len(oov), ", ".join(oov[:8]))
    for word in sorted(seed.words):
        if word not in model.vocab.index:
            continue
        for neighbor, sim in neighbors(model, word, per_word_k):
            if sim < min_similarity:
                continue
            if neighbor not in best or sim > best[neighbor]:
                best[neighbor] = sim
    for word, sim in best.items():
        if word in words:
            continue  # seeds outrank expansion
        words.add(word)
        provenance[word] = expanded_provenance(sim)
    return Lexicon(name=seed.name, category=seed.category, words=words, provenance=provenance)


def oov_words(lexicon: Lexicon, model: EmbeddingModel) -> list[str]:
    """Lexicon words missing from the model vocabulary, sorted."""
    return sorted(w for w in lexicon.words if w not in model.vocab.index)


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    """Write the TSV lexicon format: header then word/category/provenance rows."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["word", "category", "provenance"])
        for word in sorted(lexicon.words):
            writer.writerow([word, lexicon.category, lexicon.provenance[word]])


def load_lexicon(path: str | Path, name: str | None = None) -> Lexicon:
    """Read a TSV lexicon written by save_lexicon (or edited by hand)."""
    path = Path(path)
    words: set[str] = set()
    provenance: dict[str, str] = {}
    category = "custom"
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["word", "category"]:
            raise FormatError(f"{path}: expected TSV header word/category/provenance")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise FormatError(f"{path}:{lineno}: expected at least word and category")
            word = row[0].strip().lower()
            category = row[1].strip().lower()
            words.add(word)
            provenance[word] = row[2].strip() if len(row) > 2 and row[2].strip() else PROVENANCE_SEED
    return Lexicon(name=name or path.stem, category=category, words=words, provenance=provenance)


def builtin_classifier_lexicons() -> dict[str, Lexicon]:
    """Bundled starter lexicons classifying premodified heads.

    Keys are occupation, characteristic and physical; the underlying TSV
    files under biaslens/data/ are meant to be copied and edited per
    corpus.
    """
    out: dict[str, Lexicon] = {}
    data = resources.files("biaslens") / "data"
    for category in ("occupation", "characteristic", "physical"):
        with resources.as_file(data / f"{category}.tsv") as fp:
            out[category] = load_lexicon(fp, name=category)
    return out
