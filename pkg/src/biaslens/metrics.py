"""The bias metrics: presence, premodified terms, modifier ratio, generics,
binomial ordering, and embedding associations.

All counting metrics are pure functions over a CorpusView; association
metrics are pure functions over a trained EmbeddingModel.  Undefined
proportions (zero denominators) are represented as None, never 0 or NaN.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import CorpusView
from .embedding import EmbeddingModel
from .lexicon import (
    DEFAULT_BINOMIAL_PAIRS,
    DEFAULT_GENERICS_PAIRS,
    GenericsPairTable,
    Lexicon,
)

#: Head classification priority for the premodification metric.
CLASSIFIER_PRIORITY = ("occupation", "characteristic", "physical")
UNCLASSIFIED = "unclassified"

DEFAULT_COORDINATORS = ("and", "or")


def _share(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def token_counts(view: CorpusView, words: Iterable[str]) -> dict[str, int]:
    """Occurrences of each word across the view, in one pass."""
    wanted = set(words)
    totals: Counter[str] = Counter()
    for _, seq in view.documents():
        totals.update(seq.tokens)
    return {w: totals.get(w, 0) for w in wanted}


@dataclass
class PresenceResult:
    """Male/female token volume for one slice; the first-order bias signal."""

    label: str
    male_count: int
    female_count: int
    female_proportion: Optional[float]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "male_count": self.male_count,
            "female_count": self.female_count,
            "female_proportion": self.female_proportion,
        }


def presence(view: CorpusView, male: Lexicon, female: Lexicon) -> PresenceResult:
    """Count tokens from each gender lexicon across the view.

    The lexicons must be disjoint.  female_proportion is None when the
    slice contains no gendered tokens at all.
    """
    overlap = male.words & female.words
    if overlap:
        raise ValueError(f"gender lexicons overlap: {sorted(overlap)[:5]}")
    counts = token_counts(view, male.words | female.words)
    male_count = sum(counts[w] for w in male.words)
    female_count = sum(counts[w] for w in female.words)
    return PresenceResult(
        label=view.label,
        male_count=male_count,
        female_count=female_count,
        female_proportion=_share(female_count, male_count + female_count),
    )


def modifier_ratio(view: CorpusView) -> Optional[float]:
    """Share of "female" among the literal modifier tokens female/male.

    None when neither token occurs.
    """
    counts = token_counts(view, ("female", "male"))
    return _share(counts["female"], counts["female"] + counts["male"])


@dataclass
class PremodEntry:
    head: str
    frequency: int
    category: str

    def to_dict(self) -> dict:
        return {"head": self.head, "frequency": self.frequency, "category": self.category}


@dataclass
class PremodResult:
    """Heads premodified by each gender modifier, with classification."""

    label: str
    entries: dict[str, list[PremodEntry]]  # gender -> entries, by descending frequency
    equally_premodified: list[str]  # heads premodified by both genders, sorted
    unique_term_counts: dict[str, dict[str, int]]  # gender -> category -> distinct heads
    min_freq: int

    def heads(self, gender: str) -> set[str]:
        return {e.head for e in self.entries.get(gender, [])}

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "entries": {g: [e.to_dict() for e in es] for g, es in self.entries.items()},
            "equally_premodified": list(self.equally_premodified),
            "unique_term_counts": self.unique_term_counts,
            "min_freq": self.min_freq,
        }


def premodified(
    view: CorpusView,
    modifiers: Mapping[str, str] | None = None,
    classifiers: Mapping[str, Lexicon] | None = None,
    min_freq: int = 1,
) -> PremodResult:
    """Extract heads immediately following a gender modifier in a sentence.

    A head is the token right after "male"/"female" (configurable via
    modifiers, a gender->token mapping); a modifier at sentence end yields
    nothing.  Heads are classified by lexicon membership with priority
    occupation > characteristic > physical, else unclassified, and heads
    below min_freq are dropped.  Entries are ordered by descending
    frequency, then lexicographically.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    modifiers = dict(modifiers) if modifiers is not None else {"male": "male", "female": "female"}
    classifiers = dict(classifiers) if classifiers is not None else {}
    modifier_tokens = {tok: gender for gender, tok in modifiers.items()}
    if len(modifier_tokens) != len(modifiers):
        raise ValueError("modifier tokens must be distinct")
    categories = [c for c in CLASSIFIER_PRIORITY if c in classifiers]
    categories += sorted(set(classifiers) - set(CLASSIFIER_PRIORITY))

    raw: dict[str, Counter[str]] = {gender: Counter() for gender in modifiers}
    for _, seq in view.documents():
        tokens = seq.tokens
        ends = [e for _, e in seq.sentence_bounds]
        if not ends:
            continue
        hits = [i for i, t in enumerate(tokens) if t in modifier_tokens]
        for i in hits:
            # the head must stay inside the modifier's sentence
            pos = bisect_right(ends, i)
            sentence_end = ends[pos] if pos < len(ends) else ends[-1]
            if i + 1 < sentence_end:
                raw[modifier_tokens[tokens[i]]][tokens[i + 1]] += 1

    def classify(head: str) -> str:
        for cat in categories:
            if head in classifiers[cat]:
                return cat
        return UNCLASSIFIED

    entries: dict[str, list[PremodEntry]] = {}
    unique: dict[str, dict[str, int]] = {}
    for gender in sorted(modifiers):
        kept = [(head, freq) for head, freq in raw[gender].items() if freq >= min_freq]
        kept.sort(key=lambda hf: (-hf[1], hf[0]))
        entries[gender] = [PremodEntry(head=h, frequency=f, category=classify(h)) for h, f in kept]
        per_category: dict[str, int] = {cat: 0 for cat in categories}
        per_category[UNCLASSIFIED] = 0
        for entry in entries[gender]:
            per_category[entry.category] += 1
        per_category["total"] = len(entries[gender])
        unique[gender] = per_category

    genders = sorted(modifiers)
    common: set[str] = set.intersection(*({e.head for e in entries[g]} for g in genders)) if genders else set()
    return PremodResult(
        label=view.label,
        entries=entries,
        equally_premodified=sorted(common),
        unique_term_counts=unique,
        min_freq=min_freq,
    )


@dataclass
class GenericsPairCount:
    marked: str
    neutral: str
    marked_count: int
    neutral_count: int
    neutral_share: Optional[float]

    def to_dict(self) -> dict:
        return {
            "marked": self.marked,
            "neutral": self.neutral,
            "marked_count": self.marked_count,
            "neutral_count": self.neutral_count,
            "neutral_share": self.neutral_share,
        }


@dataclass
class GenericsResult:
    """Androcentric generics vs. their gender-neutral counterparts."""

    label: str
    pairs: list[GenericsPairCount]

    def to_dict(self) -> dict:
        return {"label": self.label, "pairs": [p.to_dict() for p in self.pairs]}


def generics_trend(view: CorpusView, table: GenericsPairTable = DEFAULT_GENERICS_PAIRS) -> GenericsResult:
    """Token counts per (marked, neutral) pair and the neutral term's share."""
    words = [w for pair in table.pairs for w in pair]
    counts = token_counts(view, words)
    pairs = [
        GenericsPairCount(
            marked=marked,
            neutral=neutral,
            marked_count=counts[marked],
            neutral_count=counts[neutral],
            neutral_share=_share(counts[neutral], counts[marked] + counts[neutral]),
        )
        for marked, neutral in table.pairs
    ]
    return GenericsResult(label=view.label, pairs=pairs)


@dataclass
class BinomialPairCount:
    male_term: str
    female_term: str
    male_first_count: int
    female_first_count: int
    male_first_share: Optional[float]

    def to_dict(self) -> dict:
        return {
            "male_term": self.male_term,
            "female_term": self.female_term,
            "male_first_count": self.male_first_count,
            "female_first_count": self.female_first_count,
            "male_first_share": self.male_first_share,
        }


@dataclass
class BinomialResult:
    """Who is named first in coordinated gendered pairs ("husband and wife")."""

    label: str
    pairs: list[BinomialPairCount]
    male_first_total: int
    female_first_total: int
    aggregate_male_first_share: Optional[float]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "pairs": [p.to_dict() for p in self.pairs],
            "male_first_total": self.male_first_total,
            "female_first_total": self.female_first_total,
            "aggregate_male_first_share": self.aggregate_male_first_share,
        }


def binomial_order(
    view: CorpusView,
    pairs: Sequence[tuple[str, str]] = DEFAULT_BINOMIAL_PAIRS,
    window: int = 3,
    coordinators: Sequence[str] = DEFAULT_COORDINATORS,
) -> BinomialResult:
    """Count orderings of coordinated gendered pairs.

    A coordination is a pair of occurrences of the two terms, adjacent in
    the sense that no other occurrence of either term lies between them,
    within `window` tokens of each other in one sentence, with "and"/"or"
    strictly between.  Each coordination counts once, for whichever term
    comes first.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    coord_set = frozenset(coordinators)
    term_genders: dict[str, dict[str, str]] = {}
    for male_term, female_term in pairs:
        if male_term == female_term:
            raise ValueError(f"binomial pair maps a term to itself: {male_term!r}")
        term_genders[(male_term, female_term)] = {male_term: "m", female_term: "f"}

    male_first: Counter[tuple[str, str]] = Counter()
    female_first: Counter[tuple[str, str]] = Counter()
    all_terms = frozenset(t for pair in pairs for t in pair) | coord_set

    for _, seq in view.documents():
        tokens = seq.tokens
        for start, end in seq.sentence_bounds:
            hits = [i for i in range(start, end) if tokens[i] in all_terms]
            if len(hits) < 3:
                continue
            coord_positions = [i for i in hits if tokens[i] in coord_set]
            if not coord_positions:
                continue
            for pair, genders in term_genders.items():
                occ = [(i, genders[tokens[i]]) for i in hits if tokens[i] in genders]
                for (p1, g1), (p2, g2) in zip(occ, occ[1:]):
                    if g1 == g2 or p2 - p1 > window:
                        continue
                    lo = bisect_right(coord_positions, p1)
                    if lo < len(coord_positions) and coord_positions[lo] < p2:
                        (male_first if g1 == "m" else female_first)[pair] += 1

    pair_counts = []
    for pair in pairs:
        m, f = male_first[tuple(pair)], female_first[tuple(pair)]
        pair_counts.append(
            BinomialPairCount(
                male_term=pair[0],
                female_term=pair[1],
                male_first_count=m,
                female_first_count=f,
                male_first_share=_share(m, m + f),
            )
        )
    m_total = sum(male_first.values())
    f_total = sum(female_first.values())
    return BinomialResult(
        label=view.label,
        pairs=pair_counts,
        male_first_total=m_total,
        female_first_total=f_total,
        aggregate_male_first_share=_share(m_total, m_total + f_total),
    )


@dataclass
class GenderAssociation:
    """How strongly one gender anchor relates to a theme lexicon."""

    lexicon: str
    anchor_words: list[str]
    top_terms: list[tuple[str, float]]  # descending similarity
    mean_similarity: float  # mean over exactly the top_k ranked terms
    lexicon_mean: float  # mean over every in-vocabulary theme word
    top_k: int

    def to_dict(self) -> dict:
        return {
            "lexicon": self.lexicon,
            "anchor_words": list(self.anchor_words),
            "top_terms": [[w, s] for w, s in self.top_terms],
            "mean_similarity": self.mean_similarity,
            "lexicon_mean": self.lexicon_mean,
            "top_k": self.top_k,
        }


@dataclass
class AssociationResult:
    """Male and female theme associations side by side."""

    theme: str
    male: GenderAssociation
    female: GenderAssociation
    gap: float  # female mean - male mean

    def to_dict(self) -> dict:
        return {
            "theme": self.theme,
            "male": self.male.to_dict(),
            "female": self.female.to_dict(),
            "gap": self.gap,
        }


def association(
    model: EmbeddingModel,
    gender_terms: Lexicon,
    theme: Lexicon,
    top_k: int,
) -> GenderAssociation:
    """Rank theme words by cosine similarity to the gender anchor.

    The anchor is the centroid of the gender lexicon's in-vocabulary
    vectors (for the default singleton lexicons, simply that word's
    vector).  mean_similarity averages exactly the top_k ranked terms;
    lexicon_mean averages every ranked theme word.  Theme words with zero
    vectors carry no direction and are excluded from the ranking.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    anchor_words = sorted(w for w in gender_terms.words if w in model.vocab.index)
    if not anchor_words:
        raise ValueError(f"no words of gender lexicon {gender_terms.name!r} are in the vocabulary")
    theme_words = sorted(w for w in theme.words if w in model.vocab.index)
    if not theme_words:
        raise ValueError(f"no words of theme lexicon {theme.name!r} are in the vocabulary")

    vectors = model.input_vectors
    anchor = np.mean(
        [vectors[model.vocab.index[w]].astype(np.float64) for w in anchor_words], axis=0
    )
    anchor_norm = np.linalg.norm(anchor)
    if anchor_norm == 0.0:
        raise ValueError(f"gender lexicon {gender_terms.name!r} has a zero centroid vector")

    ranked: list[tuple[str, float]] = []
    for word in theme_words:
        vec = vectors[model.vocab.index[word]].astype(np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            continue
        ranked.append((word, float(np.dot(vec, anchor) / (norm * anchor_norm))))
    if not ranked:
        raise ValueError(f"no words of theme lexicon {theme.name!r} have nonzero vectors")
    ranked.sort(key=lambda ws: (-ws[1], ws[0]))

    top = ranked[:top_k]
    return GenderAssociation(
        lexicon=gender_terms.name,
        anchor_words=anchor_words,
        top_terms=top,
        mean_similarity=float(np.mean([s for _, s in top])),
        lexicon_mean=float(np.mean([s for _, s in ranked])),
        top_k=top_k,
    )


def paired_association(
    model: EmbeddingModel,
    male_terms: Lexicon,
    female_terms: Lexicon,
    theme: Lexicon,
    top_k: int,
) -> AssociationResult:
    """Run association for both genders and pair the results."""
    male = association(model, male_terms, theme, top_k)
    female = association(model, female_terms, theme, top_k)
    return AssociationResult(
        theme=theme.name,
        male=male,
        female=female,
        gap=female.mean_similarity - male.mean_similarity,
    )
