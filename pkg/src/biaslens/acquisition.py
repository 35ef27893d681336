"""Document acquisition: Guardian Open Platform client and local corpus loaders.

The canonical on-disk corpus format is JSONL, one object per line:

    {"id": str, "text": str, "date": "YYYY-MM-DD" | null, "source": str}

UTF-8, LF line endings.  Streamable, appendable and diff-friendly.
"""

from __future__ import annotations

import html
import json
import logging
import re
import time
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Callable, Iterator, Optional

import requests

from .errors import CredentialError, FormatError

logger = logging.getLogger(__name__)

GUARDIAN_SEARCH_URL = "https://content.guardianapis.com/search"
#: Env var holding the Guardian API key; never passed as a CLI flag value.
GUARDIAN_API_KEY_ENV = "GUARDIAN_API_KEY"

_TAG_RE = re.compile(r"<[^>]+>")


@dataclass(frozen=True)
class RawDocument:
    """One ingested text: the unit of all counting.

    id must be non-empty and unique within a corpus; text non-empty after
    whitespace trim.
    """

    id: str
    text: str
    date: Optional[date] = None
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


@dataclass
class IngestManifest:
    """Outcome of a fetch: what was written where, and what failed."""

    documents_written: int = 0
    date_range_covered: tuple[Optional[date], Optional[date]] = (None, None)
    output_path: str = ""
    failures: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class LoadStats:
    """Lenient-mode bookkeeping for loaders: how many records were skipped."""

    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def record(self, where: str, reason: str) -> None:
        self.skipped += 1
        self.failures.append((where, reason))


def strip_tags(markup: str) -> str:
    """Drop every HTML/XML tag and unescape entities. No allowlist."""
    return html.unescape(_TAG_RE.sub(" ", markup))


def _parse_doc_date(value) -> Optional[date]:
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise ValueError(f"date must be an ISO-8601 string, got {value!r}")
    # Accept plain dates and full timestamps ("2018-01-01T10:05:00Z").
    return datetime.fromisoformat(value.replace("Z", "+00:00")).date()


def write_jsonl(documents: list[RawDocument] | Iterator[RawDocument], path: str | Path) -> int:
    """Append documents to a JSONL corpus file; returns lines written."""
    path = Path(path)
    n = 0
    with path.open("a", encoding="utf-8", newline="\n") as fh:
        for doc in documents:
            rec = {
                "id": doc.id,
                "text": doc.text,
                "date": doc.date.isoformat() if doc.date else None,
                "source": doc.source,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def load_jsonl(
    path: str | Path,
    strict: bool = True,
    stats: LoadStats | None = None,
) -> Iterator[RawDocument]:
    """Stream RawDocuments from a JSONL corpus file, in file order.

    Each line must be a JSON object with at least id and text; dates are
    parsed from ISO-8601 when present.  A malformed line raises FormatError
    naming the line number in strict mode, or is skipped and counted in
    stats in lenient mode.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("line is not a JSON object")
                doc = RawDocument(
                    id=str(rec["id"]),
                    text=rec["text"],
                    date=_parse_doc_date(rec.get("date")),
                    source=rec.get("source", ""),
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                if strict:
                    raise FormatError(f"{path}:{lineno}: malformed document line: {exc}") from exc
                if stats is not None:
                    stats.record(f"{path}:{lineno}", str(exc))
                continue
            yield doc


def load_plaintext_dir(
    path: str | Path,
    metadata_rule: str | None = None,
    source: str = "",
    strict: bool = True,
    stats: LoadStats | None = None,
) -> Iterator[RawDocument]:
    """Stream one document per *.txt file, in lexicographic filename order.

    The document id is the filename stem.  metadata_rule is a filename
    pattern for extracting a year: a pattern like "YYYY_*" means the stem
    starts with a 4-digit year (any other placement of YYYY works the same
    way, e.g. "*_YYYY").  A non-UTF-8 or empty file raises FormatError
    naming the file in strict mode; lenient mode decodes with replacement
    characters or skips, counting into stats.
    """
    root = Path(path)
    if not root.is_dir():
        raise FormatError(f"not a directory: {root}")
    year_re = None
    if metadata_rule:
        if "YYYY" not in metadata_rule:
            raise ValueError(f"metadata_rule must contain YYYY: {metadata_rule!r}")
        pattern = re.escape(metadata_rule).replace("YYYY", r"(\d{4})").replace(r"\*", r".*")
        year_re = re.compile(rf"^{pattern}$")

    for file in sorted(root.iterdir(), key=lambda p: p.name):
        if not file.is_file() or file.suffix != ".txt":
            continue
        try:
            text = file.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            if strict:
                raise FormatError(f"{file}: not valid UTF-8") from exc
            if stats is not None:
                stats.record(str(file), "decoded with replacement characters")
            text = file.read_text(encoding="utf-8", errors="replace")
        if not text.strip():
            if strict:
                raise FormatError(f"{file}: empty document")
            if stats is not None:
                stats.record(str(file), "empty file skipped")
            continue
        doc_date = None
        if year_re is not None:
            m = year_re.match(file.stem)
            if m:
                doc_date = date(int(m.group(1)), 1, 1)
        yield RawDocument(id=file.stem, text=text, date=doc_date, source=source)


def _existing_ids(path: Path) -> set[str]:
    ids: set[str] = set()
    if not path.exists():
        return ids
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                ids.add(str(json.loads(line)["id"]))
            except (KeyError, json.JSONDecodeError):
                continue
    return ids


def fetch_guardian(
    api_key: str,
    from_date: date,
    to_date: date,
    page_size: int,
    out_path: str | Path,
    content_type: str | None = "article",
    rate_limit_s: float = 0.2,
    max_attempts: int = 5,
    http_get: Callable[..., requests.Response] | None = None,
) -> IngestManifest:
    """Fetch Guardian articles into a JSONL corpus, paginating to the end.

    Writes one line per article (id, body text with tags stripped,
    publication date, source="guardian").  Resumable: ids already present
    in out_path are skipped, so re-running the same range produces no
    duplicates.  Network failures are retried with exponential backoff up
    to max_attempts, then recorded in the manifest's failures; HTTP 401/403
    aborts with CredentialError.  content_type=None disables the type
    filter (the default requests articles only).

    http_get is injectable for tests; it must behave like requests.get.
    """
    if not api_key:
        raise ValueError("api_key must be non-empty")
    if from_date > to_date:
        raise ValueError(f"from_date {from_date} is after to_date {to_date}")
    if not (1 <= page_size <= 200):
        raise ValueError(f"page_size must be in 1..200, got {page_size}")
    out_path = Path(out_path)
    getter = http_get if http_get is not None else requests.get

    manifest = IngestManifest(output_path=str(out_path))
    seen = _existing_ids(out_path)
    dates_seen: list[date] = []
    page = 1
    total_pages = 1
    last_request_at = 0.0

    while page <= total_pages:
        params = {
            "api-key": api_key,
            "from-date": from_date.isoformat(),
            "to-date": to_date.isoformat(),
            "page-size": page_size,
            "page": page,
            "show-fields": "bodyText",
        }
        if content_type:
            params["type"] = content_type

        payload = None
        for attempt in range(1, max_attempts + 1):
            wait = rate_limit_s - (time.monotonic() - last_request_at)
            if wait > 0:
                time.sleep(wait)
            try:
                last_request_at = time.monotonic()
                resp = getter(GUARDIAN_SEARCH_URL, params=params, timeout=30)
                if resp.status_code in (401, 403):
                    raise CredentialError(f"Guardian API rejected the key (HTTP {resp.status_code})")
                resp.raise_for_status()
                payload = resp.json()
                break
            except CredentialError:
                raise
            except (requests.RequestException, ValueError) as exc:
                if attempt == max_attempts:
                    manifest.failures.append((f"page {page}", f"giving up after {attempt} attempts: {exc}"))
                else:
                    backoff = rate_limit_s * (2 ** (attempt - 1))
                    logger.warning("page %d attempt %d failed (%s); retrying in %.1fs", page, attempt, exc, backoff)
                    time.sleep(backoff)
        if payload is None:
            break  # this page is unrecoverable; stop rather than skip a hole

        response = payload.get("response") if isinstance(payload, dict) else None
        if not isinstance(response, dict) or "results" not in response:
            manifest.failures.append((f"page {page}", "malformed API payload: no response.results"))
            break
        total_pages = int(response.get("pages", page))
        batch: list[RawDocument] = []
        for item in response["results"]:
            try:
                doc_id = str(item["id"])
                body = strip_tags(item.get("fields", {}).get("bodyText", ""))
                doc = RawDocument(
                    id=doc_id,
                    text=body,
                    date=_parse_doc_date(item.get("webPublicationDate")),
                    source="guardian",
                )
            except (KeyError, TypeError, ValueError) as exc:
                manifest.failures.append((f"page {page}", f"skipped item: {exc}"))
                continue
            if doc.id in seen:
                continue
            seen.add(doc.id)
            batch.append(doc)
            if doc.date:
                dates_seen.append(doc.date)
        manifest.documents_written += write_jsonl(batch, out_path)
        page += 1

    if dates_seen:
        manifest.date_range_covered = (min(dates_seen), max(dates_seen))
    return manifest
