from __future__ import annotations

import json
from datetime import date
from pathlib import Path

import pytest
import requests

from biaslens import (
    CredentialError,
    FormatError,
    LoadStats,
    RawDocument,
    fetch_guardian,
    load_jsonl,
    load_plaintext_dir,
    strip_tags,
    write_jsonl,
)

DATA_DIR = Path(__file__).parent / "data"


class FakeResponse:
    def __init__(self, payload=None, status_code=200, exc=None):
        self.payload = payload
        self.status_code = status_code
        self.exc = exc

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"HTTP {self.status_code}")

    def json(self):
        if self.exc:
            raise self.exc
        return self.payload


class FakeGuardian:
    """Stands in for requests.get; serves queued responses and records calls."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def __call__(self, url, params=None, timeout=None):
        self.calls.append(dict(params))
        if not self.responses:
            raise AssertionError("no more queued responses")
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def two_page_fixture():
    with (DATA_DIR / "guardian_two_page.json").open(encoding="utf-8") as fh:
        return json.load(fh)["pages"]


def test_raw_document_requires_id_and_text():
    with pytest.raises(ValueError):
        RawDocument("", "text")
    with pytest.raises(ValueError):
        RawDocument("a", "   \n ")


def test_strip_tags():
    assert strip_tags("<p>The committee</p> met &amp; voted.") == " The committee  met & voted."


def test_load_jsonl_in_order(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(
        [
            RawDocument("a", "one", date(2009, 1, 2), "s"),
            RawDocument("b", "two"),
            RawDocument("c", "three"),
        ],
        path,
    )
    docs = list(load_jsonl(path))
    assert [d.id for d in docs] == ["a", "b", "c"]
    assert docs[0].date == date(2009, 1, 2)
    assert docs[1].date is None


def test_load_jsonl_empty_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("", encoding="utf-8")
    assert list(load_jsonl(path)) == []


def test_load_jsonl_malformed_line_lenient(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "ok"}\nnot json\n', encoding="utf-8")
    stats = LoadStats()
    docs = list(load_jsonl(path, strict=False, stats=stats))
    assert [d.id for d in docs] == ["a"]
    assert stats.skipped == 1


def test_load_jsonl_malformed_line_strict_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "ok"}\n{"id": "b"}\n', encoding="utf-8")
    with pytest.raises(FormatError, match=":2"):
        list(load_jsonl(path))


def test_load_plaintext_dir_order_and_ids(tmp_path):
    (tmp_path / "b.txt").write_text("second file", encoding="utf-8")
    (tmp_path / "a.txt").write_text("first file", encoding="utf-8")
    (tmp_path / "ignored.dat").write_text("not text", encoding="utf-8")
    docs = list(load_plaintext_dir(tmp_path))
    assert [d.id for d in docs] == ["a", "b"]


def test_load_plaintext_dir_empty(tmp_path):
    assert list(load_plaintext_dir(tmp_path)) == []


def test_load_plaintext_dir_year_pattern(tmp_path):
    (tmp_path / "1845_novel.txt").write_text("a tale", encoding="utf-8")
    (docs,) = list(load_plaintext_dir(tmp_path, metadata_rule="YYYY_*"))
    assert docs.date.year == 1845


def test_load_plaintext_dir_non_utf8(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_bytes(b"caf\xe9 latin-1")
    with pytest.raises(FormatError, match="bad.txt"):
        list(load_plaintext_dir(tmp_path))
    stats = LoadStats()
    (doc,) = list(load_plaintext_dir(tmp_path, strict=False, stats=stats))
    assert "caf" in doc.text
    assert stats.skipped == 1


def test_load_plaintext_dir_empty_file(tmp_path):
    (tmp_path / "empty.txt").write_text("   \n", encoding="utf-8")
    (tmp_path / "ok.txt").write_text("some text", encoding="utf-8")
    with pytest.raises(FormatError, match="empty"):
        list(load_plaintext_dir(tmp_path))
    stats = LoadStats()
    docs = list(load_plaintext_dir(tmp_path, strict=False, stats=stats))
    assert [d.id for d in docs] == ["ok"]
    assert stats.skipped == 1


def test_fetch_precondition_errors(tmp_path):
    out = tmp_path / "out.jsonl"
    with pytest.raises(ValueError):
        fetch_guardian("", date(2018, 1, 1), date(2018, 1, 2), 50, out)
    with pytest.raises(ValueError):
        fetch_guardian("k", date(2018, 1, 2), date(2018, 1, 1), 50, out)
    with pytest.raises(ValueError):
        fetch_guardian("k", date(2018, 1, 1), date(2018, 1, 2), 0, out)
    with pytest.raises(ValueError):
        fetch_guardian("k", date(2018, 1, 1), date(2018, 1, 2), 201, out)


def test_fetch_two_page_replay(tmp_path):
    pages = two_page_fixture()
    expected_items = sum(len(p["response"]["results"]) for p in pages)
    fake = FakeGuardian([FakeResponse(p) for p in pages])
    out = tmp_path / "out.jsonl"
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, out,
                              rate_limit_s=0.0, http_get=fake)
    assert manifest.documents_written == expected_items
    docs = list(load_jsonl(out))
    assert len(docs) == expected_items
    assert manifest.documents_written == len(out.read_text(encoding="utf-8").splitlines())
    assert {d.source for d in docs} == {"guardian"}
    assert manifest.date_range_covered == (date(2018, 1, 1), date(2018, 1, 2))
    # tags stripped, entities unescaped
    alpha = next(d for d in docs if d.id.endswith("alpha"))
    assert "<p>" not in alpha.text
    beta = next(d for d in docs if d.id.endswith("beta"))
    assert "&" in beta.text and "&amp;" not in beta.text
    # pagination requested both pages in order
    assert [c["page"] for c in fake.calls] == [1, 2]
    assert all(c["show-fields"] == "bodyText" for c in fake.calls)
    assert all(c["type"] == "article" for c in fake.calls)


def test_fetch_resume_skips_existing_ids(tmp_path):
    pages = two_page_fixture()
    out = tmp_path / "out.jsonl"
    fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, out,
                   rate_limit_s=0.0, http_get=FakeGuardian([FakeResponse(p) for p in pages]))
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, out,
                              rate_limit_s=0.0, http_get=FakeGuardian([FakeResponse(p) for p in pages]))
    assert manifest.documents_written == 0
    ids = [d.id for d in load_jsonl(out)]
    assert len(ids) == len(set(ids)) == 3


def test_fetch_credential_error(tmp_path):
    fake = FakeGuardian([FakeResponse(status_code=401)])
    with pytest.raises(CredentialError):
        fetch_guardian("bad", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                       rate_limit_s=0.0, http_get=fake)


def test_fetch_retries_then_records_failure(tmp_path):
    fake = FakeGuardian([requests.ConnectionError("down")] * 3)
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                              rate_limit_s=0.0, max_attempts=3, http_get=fake)
    assert manifest.documents_written == 0
    assert len(manifest.failures) == 1
    assert "3 attempts" in manifest.failures[0][1]
    assert len(fake.calls) == 3


def test_fetch_retry_succeeds_after_transient_error(tmp_path):
    pages = two_page_fixture()
    fake = FakeGuardian([
        requests.ConnectionError("blip"),
        FakeResponse(pages[0]),
        FakeResponse(pages[1]),
    ])
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                              rate_limit_s=0.0, http_get=fake)
    assert manifest.documents_written == 3
    assert manifest.failures == []


def test_fetch_skips_malformed_item(tmp_path):
    page = {
        "response": {
            "status": "ok", "currentPage": 1, "pages": 1, "pageSize": 2, "total": 2,
            "results": [
                {"id": "ok/1", "webPublicationDate": "2018-01-01T00:00:00Z",
                 "fields": {"bodyText": "Fine text here."}},
                {"webPublicationDate": "2018-01-01T00:00:00Z",
                 "fields": {"bodyText": "No id present."}},
            ],
        }
    }
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                              rate_limit_s=0.0, http_get=FakeGuardian([FakeResponse(page)]))
    assert manifest.documents_written == 1
    assert len(manifest.failures) == 1


def test_fetch_malformed_payload_recorded(tmp_path):
    fake = FakeGuardian([FakeResponse({"unexpected": True})])
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                              rate_limit_s=0.0, http_get=fake)
    assert manifest.documents_written == 0
    assert "malformed" in manifest.failures[0][1]


def test_fetch_content_type_flag(tmp_path):
    pages = two_page_fixture()
    fake = FakeGuardian([FakeResponse(p) for p in pages])
    fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, tmp_path / "o.jsonl",
                   content_type=None, rate_limit_s=0.0, http_get=fake)
    assert all("type" not in c for c in fake.calls)


def test_fetch_then_load_round_trip(tmp_path):
    pages = two_page_fixture()
    out = tmp_path / "o.jsonl"
    manifest = fetch_guardian("key", date(2018, 1, 1), date(2018, 1, 2), 2, out,
                              rate_limit_s=0.0, http_get=FakeGuardian([FakeResponse(p) for p in pages]))
    assert len(list(load_jsonl(out))) == manifest.documents_written
