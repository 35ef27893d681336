"""Tokenization, corpus assembly, time slicing and gender-swap augmentation.

Every metric and the embedding trainer operate on the types defined here:
a :class:`Corpus` is an immutable sequence of tokenized documents, and a
:class:`CorpusView` selects a metadata-filtered subset of one (typically a
publication year, e.g. "guardian-2009").
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .acquisition import RawDocument
from .errors import FormatError

# A token is a run of letters/digits, optionally joined by internal
# apostrophes or hyphens ("doctor's", "co-stars" stay single tokens).
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*", re.UNICODE)

# Sentence terminator: one or more of .!? -- a boundary only when followed
# by whitespace plus an uppercase letter, or by end of text.
_TERMINATOR_RE = re.compile(r"[.!?]+")

CACHE_MAGIC = "biaslens-corpus-cache"
CACHE_VERSION = 1


@dataclass(frozen=True)
class TokenizeConfig:
    """Tokenizer settings.

    lowercase is the only knob today; the field exists so the corpus cache
    can be invalidated when tokenization rules change.
    """

    lowercase: bool = True

    def config_hash(self) -> str:
        payload = json.dumps({"lowercase": self.lowercase}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class TokenSequence:
    """Tokens of one document plus sentence boundaries.

    sentence_bounds are half-open (start, end) index pairs into tokens,
    non-overlapping, ordered, and cover every token.
    """

    tokens: list[str]
    sentence_bounds: list[tuple[int, int]]

    def sentences(self) -> Iterator[list[str]]:
        for start, end in self.sentence_bounds:
            yield self.tokens[start:end]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DocumentMeta:
    """Identity and provenance of one corpus document (text lives in tokens)."""

    id: str
    date: Optional[date] = None
    source: str = ""

    @property
    def year(self) -> Optional[int]:
        return self.date.year if self.date is not None else None


@dataclass
class Corpus:
    """An immutable tokenized corpus; the unit of training and measurement."""

    documents: list[tuple[DocumentMeta, TokenSequence]]
    token_count: int
    id_index: dict[str, int]

    def __len__(self) -> int:
        return len(self.documents)

    def view(self, label: str = "all") -> "CorpusView":
        return CorpusView(self, list(range(len(self.documents))), label)

    def years(self) -> list[int]:
        """Distinct years present among dated documents, ascending."""
        return sorted({m.year for m, _ in self.documents if m.year is not None})

    def sources(self) -> list[str]:
        return sorted({m.source for m, _ in self.documents})


@dataclass
class CorpusView:
    """An ordered subset of a corpus's documents, e.g. one publication year."""

    parent: Corpus
    selected: list[int]
    label: str

    def __post_init__(self) -> None:
        n = len(self.parent.documents)
        prev = -1
        for pos in self.selected:
            if not (0 <= pos < n):
                raise ValueError(f"view position {pos} out of range")
            if pos <= prev:
                raise ValueError("view positions must be unique and ascending")
            prev = pos

    def __len__(self) -> int:
        return len(self.selected)

    def documents(self) -> Iterator[tuple[DocumentMeta, TokenSequence]]:
        for pos in self.selected:
            yield self.parent.documents[pos]

    def token_count(self) -> int:
        return sum(len(seq) for _, seq in self.documents())

    def materialize(self) -> Corpus:
        """A standalone Corpus holding just this view's documents (shared token data)."""
        docs = [self.parent.documents[pos] for pos in self.selected]
        return Corpus(
            documents=docs,
            token_count=sum(len(seq) for _, seq in docs),
            id_index={meta.id: i for i, (meta, _) in enumerate(docs)},
        )


@dataclass(frozen=True)
class SwapTable:
    """Symmetric word pairs for gender swapping (he<->she, him<->her, ...).

    No word may appear in two pairs, so substitution is a well-defined
    involution on surface forms.
    """

    pairs: frozenset[frozenset[str]]
    mapping: dict[str, str] = field(hash=False, compare=False, default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "SwapTable":
        mapping: dict[str, str] = {}
        normalized = set()
        for a, b in pairs:
            a, b = a.lower(), b.lower()
            if a == b:
                raise ValueError(f"swap pair maps a word to itself: {a!r}")
            for w in (a, b):
                if w in mapping:
                    raise ValueError(f"word appears in two swap pairs: {w!r}")
            mapping[a] = b
            mapping[b] = a
            normalized.add(frozenset((a, b)))
        return cls(pairs=frozenset(normalized), mapping=mapping)

    def partner(self, word: str) -> Optional[str]:
        return self.mapping.get(word)


#: Pronouns plus common kinship/person nouns, paired bijectively.  Operates on
#: surface forms only: "her" maps to "him" (the possessive reading is a known
#: approximation, see gender_swap).
DEFAULT_SWAP_PAIRS: tuple[tuple[str, str], ...] = (
    ("he", "she"),
    ("him", "her"),
    ("his", "hers"),
    ("himself", "herself"),
    ("man", "woman"),
    ("men", "women"),
    ("boy", "girl"),
    ("boys", "girls"),
    ("husband", "wife"),
    ("husbands", "wives"),
    ("son", "daughter"),
    ("sons", "daughters"),
    ("father", "mother"),
    ("fathers", "mothers"),
    ("brother", "sister"),
    ("brothers", "sisters"),
    ("king", "queen"),
    ("kings", "queens"),
    ("mr", "mrs"),
    ("sir", "madam"),
    ("gentleman", "lady"),
    ("gentlemen", "ladies"),
)


def default_swap_table() -> SwapTable:
    return SwapTable.from_pairs(DEFAULT_SWAP_PAIRS)


def tokenize(text: str, rules: TokenizeConfig | None = None) -> TokenSequence:
    """Tokenize text into lowercase word tokens with sentence bounds.

    Splits on whitespace and punctuation; internal apostrophes and hyphens
    are kept ("doctor's", "co-stars" are single tokens).  A sentence ends at
    ., ! or ? followed by whitespace plus a capital letter, or at end of
    text.  Total function: never raises, empty input yields empty output.
    """
    rules = rules or TokenizeConfig()
    tokens: list[str] = []
    starts: list[int] = []
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        tokens.append(tok.lower() if rules.lowercase else tok)
        starts.append(m.start())

    # Character offsets after which a sentence closes.
    break_positions: list[int] = []
    for m in _TERMINATOR_RE.finditer(text):
        rest = text[m.end():]
        stripped = rest.lstrip()
        if not stripped:
            break_positions.append(m.end())
        elif rest[0].isspace() and stripped[0].isupper():
            break_positions.append(m.end())

    bounds: list[tuple[int, int]] = []
    sent_start = 0
    bp = iter(break_positions)
    current_break = next(bp, None)
    for i, tok_start in enumerate(starts):
        while current_break is not None and tok_start >= current_break:
            if i > sent_start:
                bounds.append((sent_start, i))
                sent_start = i
            current_break = next(bp, None)
    if sent_start < len(tokens):
        bounds.append((sent_start, len(tokens)))
    return TokenSequence(tokens=tokens, sentence_bounds=bounds)


def build_corpus(
    documents: Iterable[RawDocument],
    rules: TokenizeConfig | None = None,
) -> Corpus:
    """Tokenize a document stream into a Corpus, preserving stream order.

    Raises ValueError on a duplicate document id, naming the id.
    """
    rules = rules or TokenizeConfig()
    docs: list[tuple[DocumentMeta, TokenSequence]] = []
    id_index: dict[str, int] = {}
    token_count = 0
    for raw in documents:
        if raw.id in id_index:
            raise ValueError(f"duplicate document id: {raw.id!r}")
        seq = tokenize(raw.text, rules)
        id_index[raw.id] = len(docs)
        docs.append((DocumentMeta(id=raw.id, date=raw.date, source=raw.source), seq))
        token_count += len(seq)
    return Corpus(documents=docs, token_count=token_count, id_index=id_index)


def slice_corpus(
    corpus: Corpus,
    year_from: int | None = None,
    year_to: int | None = None,
    source: str | None = None,
    label: str | None = None,
) -> CorpusView:
    """Select documents by year range and/or source label.

    Documents without a date match no year filter.  An empty selection is a
    valid (empty) view.
    """
    selected = []
    for pos, (meta, _) in enumerate(corpus.documents):
        if source is not None and meta.source != source:
            continue
        if year_from is not None or year_to is not None:
            if meta.year is None:
                continue
            if year_from is not None and meta.year < year_from:
                continue
            if year_to is not None and meta.year > year_to:
                continue
        selected.append(pos)
    if label is None:
        parts = []
        if source is not None:
            parts.append(source)
        if year_from is not None or year_to is not None:
            lo = year_from if year_from is not None else ""
            hi = year_to if year_to is not None else ""
            parts.append(str(lo) if lo == hi or hi == "" else f"{lo}-{hi}")
        label = "-".join(str(p) for p in parts) if parts else "all"
    return CorpusView(corpus, selected, label)


def gender_swap(corpus: Corpus, table: SwapTable | None = None) -> Corpus:
    """Replace every token in a swap pair by its partner; an exact involution.

    Metadata, sentence bounds and token_count are unchanged.
    """
    table = table or default_swap_table()
    mapping = table.mapping
    docs = []
    for meta, seq in corpus.documents:
        swapped = [mapping.get(t, t) for t in seq.tokens]
        docs.append((meta, TokenSequence(tokens=swapped, sentence_bounds=list(seq.sentence_bounds))))
    return Corpus(documents=docs, token_count=corpus.token_count, id_index=dict(corpus.id_index))


def save_corpus(corpus: Corpus, path: str | Path, rules: TokenizeConfig | None = None) -> None:
    """Write the tokenized-corpus cache: a header line then one JSON line per doc."""
    rules = rules or TokenizeConfig()
    path = Path(path)
    header = {
        "magic": CACHE_MAGIC,
        "version": CACHE_VERSION,
        "tokenizer_hash": rules.config_hash(),
        "documents": len(corpus.documents),
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for meta, seq in corpus.documents:
            rec = {
                "id": meta.id,
                "date": meta.date.isoformat() if meta.date else None,
                "source": meta.source,
                "tokens": seq.tokens,
                "bounds": [list(b) for b in seq.sentence_bounds],
            }
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_corpus(path: str | Path, rules: TokenizeConfig | None = None) -> Corpus:
    """Load a tokenized-corpus cache written by save_corpus.

    Raises FormatError on a bad magic/version, a tokenizer-config mismatch,
    or a truncated file.
    """
    rules = rules or TokenizeConfig()
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a corpus cache (bad header)") from exc
        if not isinstance(header, dict) or header.get("magic") != CACHE_MAGIC:
            raise FormatError(f"{path}: not a corpus cache (magic mismatch)")
        if header.get("version") != CACHE_VERSION:
            raise FormatError(f"{path}: unsupported cache version {header.get('version')!r}")
        if header.get("tokenizer_hash") != rules.config_hash():
            raise FormatError(f"{path}: cache built with a different tokenizer config; rebuild it")
        expected = header.get("documents")
        docs: list[tuple[DocumentMeta, TokenSequence]] = []
        id_index: dict[str, int] = {}
        token_count = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                meta = DocumentMeta(
                    id=rec["id"],
                    date=date.fromisoformat(rec["date"]) if rec.get("date") else None,
                    source=rec.get("source", ""),
                )
                seq = TokenSequence(
                    tokens=list(rec["tokens"]),
                    sentence_bounds=[tuple(b) for b in rec["bounds"]],
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: malformed cache record") from exc
            id_index[meta.id] = len(docs)
            docs.append((meta, seq))
            token_count += len(seq)
    if expected is not None and expected != len(docs):
        raise FormatError(f"{path}: truncated cache ({len(docs)} of {expected} documents)")
    return Corpus(documents=docs, token_count=token_count, id_index=id_index)
