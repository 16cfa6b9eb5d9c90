"""Phrase extraction over classified-positive sentences and report rendering.

The evidence report is the pipeline's end product: normalized noun phrase,
corpus frequency, and up to five exemplar sentences with character spans so a
UI can highlight the phrase occurrences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from . import npx, textproc
from .corpus import Sentence
from .npx import NounPhrase, PhraseStat


class ReportError(Exception):
    """Raised on unresolvable exemplars or stage-order violations."""


@dataclass(frozen=True)
class SentenceRecord:
    """Flat sentence row as persisted in the sentence store."""

    sentence_id: str
    article_id: str
    text: str

    def as_dict(self) -> dict:
        return {"sentence_id": self.sentence_id, "article_id": self.article_id, "text": self.text}


def write_sentence_store(path: Path, sentences: Iterable[Sentence]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for sentence in sentences:
            row = {
                "sentence_id": sentence.sid,
                "article_id": sentence.article_id,
                "paragraph": sentence.paragraph,
                "index": sentence.index,
                "text": sentence.text,
                "start": sentence.start,
                "end": sentence.end,
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_sentence_store(path: Path) -> Iterator[SentenceRecord]:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            yield SentenceRecord(row["sentence_id"], row.get("article_id", ""), row["text"])


def extract_sentence_phrases(
    sentence_id: str, text: str, lexicon: textproc.Lexicon | None = None
) -> list[NounPhrase]:
    """Tokenize, tag, chunk, and normalize one sentence's noun phrases."""
    tokens = textproc.pos_tag(textproc.tokenize(text), lexicon)
    if not tokens:
        return []
    root = npx.chunk_parse(tokens)
    return npx.extract_noun_phrases(root, tokens, sentence_id, text)


def extract_phrases(
    sentences: Iterable[SentenceRecord], lexicon: textproc.Lexicon | None = None
) -> Iterator[NounPhrase]:
    if lexicon is None:
        lexicon = textproc.bundled_lexicon()
    for record in sentences:
        yield from extract_sentence_phrases(record.sentence_id, record.text, lexicon)


def write_phrase_store(path: Path, phrases: Iterable[NounPhrase]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for phrase in phrases:
            row = {
                "normalized": phrase.normalized,
                "raw": phrase.raw,
                "sentence_id": phrase.sentence_id,
                "start": phrase.start,
                "end": phrase.end,
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_phrase_store(path: Path) -> Iterator[NounPhrase]:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            yield NounPhrase(
                raw=row["raw"],
                normalized=row["normalized"],
                sentence_id=row["sentence_id"],
                start=row["start"],
                end=row["end"],
            )


@dataclass
class PhraseReport:
    min_frequency: int
    entries: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"min_frequency": self.min_frequency, "phrases": self.entries}

    def to_tsv(self) -> str:
        lines = ["normalized\tfrequency\texemplar_ids"]
        for entry in self.entries:
            ids = ",".join(ex["sentence_id"] for ex in entry["exemplars"])
            lines.append(f"{entry['normalized']}\t{entry['frequency']}\t{ids}")
        return "\n".join(lines) + "\n"


def render_report(
    stats: list[PhraseStat],
    phrases: Iterable[NounPhrase],
    sentence_texts: Mapping[str, str],
    min_frequency: int = 3,
    exemplar_cap: int = npx.EXEMPLAR_CAP,
) -> PhraseReport:
    """Apply the frequency threshold and resolve exemplar ids to sentence text.

    An exemplar id that cannot be resolved to a stored sentence indicates
    store corruption and raises :class:`ReportError` naming the id.
    """
    spans: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for phrase in phrases:
        spans.setdefault((phrase.normalized, phrase.sentence_id), []).append((phrase.start, phrase.end))

    report = PhraseReport(min_frequency=min_frequency)
    for stat in stats:
        if stat.frequency < min_frequency:
            continue
        exemplars = []
        for sentence_id in stat.exemplars[:exemplar_cap]:
            if sentence_id not in sentence_texts:
                raise ReportError(f"exemplar sentence {sentence_id!r} not found in the sentence store")
            exemplars.append(
                {
                    "sentence_id": sentence_id,
                    "text": sentence_texts[sentence_id],
                    "spans": spans.get((stat.normalized, sentence_id), []),
                }
            )
        report.entries.append(
            {"normalized": stat.normalized, "frequency": stat.frequency, "exemplars": exemplars}
        )
    return report


STAGES = ("ingest", "train", "score", "bootstrap", "extract", "report")


@dataclass
class PipelineRun:
    """Stage ledger for one output directory; stages advance monotonically."""

    run_id: str
    corpus_fingerprint: str = ""
    config_snapshot: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)

    @classmethod
    def load_or_create(cls, path: Path, run_id: str, config_snapshot: dict) -> "PipelineRun":
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
            return cls(
                run_id=raw["run_id"],
                corpus_fingerprint=raw.get("corpus_fingerprint", ""),
                config_snapshot=raw.get("config_snapshot", {}),
                stages=raw.get("stages", {}),
            )
        return cls(run_id=run_id, config_snapshot=config_snapshot)

    def save(self, path: Path) -> None:
        payload = {
            "run_id": self.run_id,
            "corpus_fingerprint": self.corpus_fingerprint,
            "config_snapshot": self.config_snapshot,
            "stages": self.stages,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    def mark(self, stage: str, **details) -> None:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self.stages[stage] = {"status": "done", **details}

    def require(self, stage: str) -> None:
        if self.stages.get(stage, {}).get("status") != "done":
            raise ReportError(f"stage {stage!r} has not completed in this run directory")
