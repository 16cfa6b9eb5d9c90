"""Corpus ingestion and sentence segmentation.

Articles arrive one document per file in either a CORD-19-style JSON layout
(metadata record plus ordered body-text list) or a simpler line-oriented text
format used by tests. An optional ``metadata.csv`` index next to the documents
maps article ids to publish dates and overrides any per-file date.

Output ordering is deterministic regardless of filesystem enumeration order:
articles are sorted by article_id, sentences by (paragraph, span).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterator

from .textproc import ABBREVIATIONS

METADATA_INDEX_NAME = "metadata.csv"

_ID_KEYS = ("article_id", "paper_id", "id")
_TITLE_KEYS = ("title",)
_DATE_KEYS = ("publish_date", "publish_time", "date")


class CorpusError(Exception):
    """Unrecoverable ingestion failure (unreadable root, bad index file)."""


@dataclass(frozen=True)
class Article:
    article_id: str
    title: str
    publish_date: date | None
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class Sentence:
    """A segmented sentence; span is the trimmed character range within its paragraph."""

    article_id: str
    paragraph: int
    index: int
    text: str
    start: int
    end: int

    @property
    def sid(self) -> str:
        return f"{self.article_id}:p{self.paragraph:04d}:s{self.index:04d}"


@dataclass(frozen=True)
class CorpusFilter:
    """Exclusive lower publish-date bound; undated articles pass only when opted in."""

    min_publish_date: date | None = None
    include_undated: bool = False

    def admits(self, publish_date: date | None) -> bool:
        if publish_date is None:
            return self.include_undated
        if self.min_publish_date is None:
            return True
        return publish_date > self.min_publish_date


@dataclass
class IngestReport:
    files_read: int = 0
    files_skipped: int = 0
    articles_kept: int = 0
    sentences_emitted: int = 0
    skipped: list[dict[str, str]] = field(default_factory=list)

    def record_skip(self, path: str, cause: str) -> None:
        self.files_skipped += 1
        self.skipped.append({"path": path, "cause": cause})

    def as_dict(self) -> dict:
        return {
            "files_read": self.files_read,
            "files_skipped": self.files_skipped,
            "articles_kept": self.articles_kept,
            "sentences_emitted": self.sentences_emitted,
            "skipped": list(self.skipped),
        }


def parse_publish_date(value: str) -> date:
    """Accept YYYY, YYYY-MM, or YYYY-MM-DD; partial dates resolve to their earliest instant."""
    value = value.strip()
    match = re.fullmatch(r"(\d{4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?", value)
    if not match:
        raise ValueError(f"unparseable publish date: {value!r}")
    year = int(match.group(1))
    month = int(match.group(2) or 1)
    day = int(match.group(3) or 1)
    return date(year, month, day)


def _first_key(record: dict, keys: tuple[str, ...]) -> object | None:
    for key in keys:
        if key in record and record[key] not in (None, ""):
            return record[key]
    return None


def _parse_json_article(path: Path) -> Article:
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    if not isinstance(doc, dict):
        raise ValueError("document root is not an object")

    metadata = doc.get("metadata") if isinstance(doc.get("metadata"), dict) else {}
    article_id = _first_key(doc, _ID_KEYS) or _first_key(metadata, _ID_KEYS)
    if not article_id:
        raise ValueError("missing article id")
    title = _first_key(doc, _TITLE_KEYS) or _first_key(metadata, _TITLE_KEYS) or ""

    raw_date = _first_key(doc, _DATE_KEYS) or _first_key(metadata, _DATE_KEYS)
    publish_date = parse_publish_date(str(raw_date)) if raw_date is not None else None

    paragraphs: list[str] = []
    if isinstance(doc.get("paragraphs"), list):
        blocks = doc["paragraphs"]
    else:
        blocks = list(doc.get("abstract") or []) + list(doc.get("body_text") or [])
    for block in blocks:
        if isinstance(block, str):
            text = block
        elif isinstance(block, dict) and isinstance(block.get("text"), str):
            text = block["text"]
        else:
            raise ValueError("body block is neither a string nor an object with 'text'")
        paragraphs.append(text)
    return Article(str(article_id), str(title), publish_date, tuple(paragraphs))


def _parse_text_article(path: Path) -> Article:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError("empty document")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise ValueError("header must be 'article_id<TAB>title[<TAB>publish_date]'")
    article_id, title = header[0].strip(), header[1].strip()
    if not article_id:
        raise ValueError("missing article id")
    publish_date = None
    if len(header) >= 3 and header[2].strip():
        publish_date = parse_publish_date(header[2])
    paragraphs = tuple(line for line in lines[1:] if line.strip())
    return Article(article_id, title, publish_date, paragraphs)


def _load_metadata_index(path: Path) -> dict[str, date | None]:
    index: dict[str, date | None] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise CorpusError(f"metadata index has no header: {path}")
        id_col = next((c for c in _ID_KEYS if c in reader.fieldnames), None)
        date_col = next((c for c in _DATE_KEYS if c in reader.fieldnames), None)
        if id_col is None or date_col is None:
            raise CorpusError(
                f"metadata index needs an id column {_ID_KEYS} and a date column {_DATE_KEYS}: {path}"
            )
        for row in reader:
            article_id = (row.get(id_col) or "").strip()
            if not article_id:
                continue
            raw = (row.get(date_col) or "").strip()
            index[article_id] = parse_publish_date(raw) if raw else None
    return index


def ingest_corpus(
    root: Path | str,
    corpus_filter: CorpusFilter | None = None,
    report: IngestReport | None = None,
) -> Iterator[Article]:
    """Yield the articles under ``root`` admitted by the filter, sorted by article_id.

    Malformed document files are skipped and recorded in ``report``; an
    unreadable root raises :class:`CorpusError`.
    """
    root = Path(root)
    if corpus_filter is None:
        corpus_filter = CorpusFilter()
    if report is None:
        report = IngestReport()
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a readable directory: {root}")

    index: dict[str, date | None] = {}
    index_path = root / METADATA_INDEX_NAME
    if index_path.exists():
        index = _load_metadata_index(index_path)

    document_paths = sorted(
        p for p in root.iterdir() if p.is_file() and p.suffix in (".json", ".txt") and p.name != METADATA_INDEX_NAME
    )

    parsed: list[Article] = []
    for path in document_paths:
        report.files_read += 1
        try:
            if path.suffix == ".json":
                article = _parse_json_article(path)
            else:
                article = _parse_text_article(path)
        except (ValueError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            report.record_skip(str(path), str(exc))
            continue
        if article.article_id in index:
            article = Article(article.article_id, article.title, index[article.article_id], article.paragraphs)
        parsed.append(article)

    for article in sorted(parsed, key=lambda a: a.article_id):
        if corpus_filter.admits(article.publish_date):
            report.articles_kept += 1
            yield article


_CANDIDATE_RE = re.compile(r"[.!?]")


def _ends_with_abbreviation(text: str, end: int) -> bool:
    """True when text[:end] ends with a bundled abbreviation at a word boundary."""
    head = text[:end].lower()
    for abbrev in ABBREVIATIONS:
        if head.endswith(abbrev):
            before = end - len(abbrev) - 1
            if before < 0 or not (text[before].isalnum() or text[before] == "."):
                return True
    return False


def _paragraph_spans(text: str) -> list[tuple[int, int]]:
    """Trimmed sentence spans for one paragraph under the boundary rule table."""
    spans: list[tuple[int, int]] = []
    length = len(text)

    start = 0
    while start < length and text[start].isspace():
        start += 1
    if start == length:
        return spans

    for match in _CANDIDATE_RE.finditer(text):
        pos = match.end()
        if pos <= start:
            continue
        if pos >= length or not text[pos].isspace():
            continue
        nxt = pos
        while nxt < length and text[nxt].isspace():
            nxt += 1
        if nxt == length:
            break
        if not (text[nxt].isupper() or text[nxt].isdigit()):
            continue
        if match.group() == "." and _ends_with_abbreviation(text, pos):
            continue
        if text.count("(", 0, pos) > text.count(")", 0, pos):
            continue
        spans.append((start, pos))
        start = nxt

    end = length
    while end > start and text[end - 1].isspace():
        end -= 1
    if end > start:
        spans.append((start, end))
    return spans


def segment_sentences(article: Article) -> list[Sentence]:
    """Split an article's paragraphs into trimmed, uniquely identified sentences."""
    sentences: list[Sentence] = []
    for para_idx, paragraph in enumerate(article.paragraphs):
        for sent_idx, (start, end) in enumerate(_paragraph_spans(paragraph)):
            sentences.append(
                Sentence(
                    article_id=article.article_id,
                    paragraph=para_idx,
                    index=sent_idx,
                    text=paragraph[start:end],
                    start=start,
                    end=end,
                )
            )
    return sentences
