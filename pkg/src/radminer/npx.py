"""Noun-phrase chunking, normalization, and corpus-wide frequency aggregation.

The chunker is a flat grammar over coarse POS tags:

    NP := DET? (ADJ | VBN | VBG | NOUN | NOUN_PL | PROPN | NUM)* (NOUN | NOUN_PL | PROPN)+

matched left to right, longest match first, with no backtracking across a
matched phrase. The parse keeps a tree shape (S over NP/TOKEN nodes) so a
richer parser could be slotted in without touching the extraction code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .textproc import NOUN_TAGS, Tag, Token, bundled_stopwords, lemmatize

_MODIFIER_TAGS = frozenset({Tag.ADJ, Tag.VBN, Tag.VBG, Tag.NOUN, Tag.NOUN_PL, Tag.PROPN, Tag.NUM})

EXEMPLAR_CAP = 5


@dataclass(frozen=True)
class ParseNode:
    """Node in the (flat) parse tree; span is a half-open token index range."""

    label: str  # "S" | "NP" | "TOKEN"
    span: tuple[int, int]
    children: tuple["ParseNode", ...] = ()


@dataclass(frozen=True)
class NounPhrase:
    raw: str
    normalized: str
    sentence_id: str
    start: int  # character span within the sentence
    end: int


@dataclass
class PhraseStat:
    normalized: str
    frequency: int
    exemplars: list[str] = field(default_factory=list)


def _token_node(index: int) -> ParseNode:
    return ParseNode("TOKEN", (index, index + 1))


def _match_np(tags: list[Tag], start: int) -> int | None:
    """Length-greedy NP match at ``start``; returns the end index or None."""
    i = start
    if i < len(tags) and tags[i] is Tag.DET:
        i += 1
    run_end = i
    while run_end < len(tags) and tags[run_end] in _MODIFIER_TAGS:
        run_end += 1
    # The phrase must end in a noun: trim non-noun modifiers off the tail.
    while run_end > i and tags[run_end - 1] not in NOUN_TAGS:
        run_end -= 1
    if run_end == i:
        return None
    return run_end


def chunk_parse(tokens: list[Token]) -> ParseNode:
    """Build the flat S(NP | TOKEN ...) tree over fully tagged tokens."""
    tags: list[Tag] = []
    for token in tokens:
        if token.tag is None:
            raise ValueError(f"untagged token: {token.text!r}")
        tags.append(token.tag)

    children: list[ParseNode] = []
    i = 0
    while i < len(tags):
        end = _match_np(tags, i)
        if end is not None:
            np_children = tuple(_token_node(j) for j in range(i, end))
            children.append(ParseNode("NP", (i, end), np_children))
            i = end
        else:
            children.append(_token_node(i))
            i += 1
    return ParseNode("S", (0, len(tags)), tuple(children))


def normalize_phrase(
    tokens: list[Token],
    stopwords: frozenset[str] | None = None,
    lemma_exceptions: Mapping[str, str] | None = None,
) -> str:
    """Lowercase, drop stopwords, lemmatize the head (final) token."""
    if stopwords is None:
        stopwords = bundled_stopwords()
    kept = [(token.text.lower(), token.tag) for token in tokens]
    kept = [(text, tag) for text, tag in kept if text not in stopwords]
    if not kept:
        return ""
    head_text, head_tag = kept[-1]
    assert head_tag is not None
    words = [text for text, _ in kept[:-1]]
    words.append(lemmatize(head_text, head_tag, lemma_exceptions))
    return " ".join(words)


def extract_noun_phrases(
    root: ParseNode,
    tokens: list[Token],
    sentence_id: str,
    sentence_text: str | None = None,
    stopwords: frozenset[str] | None = None,
) -> list[NounPhrase]:
    """One NounPhrase per NP node, in textual order; phrases that normalize to empty are dropped."""
    phrases: list[NounPhrase] = []
    for node in root.children:
        if node.label != "NP":
            continue
        i, j = node.span
        np_tokens = tokens[i:j]
        start = np_tokens[0].start
        end = np_tokens[-1].end
        if sentence_text is not None:
            raw = sentence_text[start:end]
        else:
            raw = " ".join(t.text for t in np_tokens)
        normalized = normalize_phrase(np_tokens, stopwords)
        if not normalized:
            continue
        phrases.append(NounPhrase(raw=raw, normalized=normalized, sentence_id=sentence_id, start=start, end=end))
    return phrases


def aggregate_phrases(phrases: Iterable[NounPhrase], exemplar_cap: int = EXEMPLAR_CAP) -> list[PhraseStat]:
    """Group by normalized text; sort by frequency desc, ties lexicographic asc.

    Exemplar sentence ids are recorded in first-seen order, one entry per
    distinct sentence, up to ``exemplar_cap``.
    """
    counts: dict[str, int] = {}
    exemplars: dict[str, list[str]] = {}
    for phrase in phrases:
        counts[phrase.normalized] = counts.get(phrase.normalized, 0) + 1
        bucket = exemplars.setdefault(phrase.normalized, [])
        if len(bucket) < exemplar_cap and phrase.sentence_id not in bucket:
            bucket.append(phrase.sentence_id)
    stats = [
        PhraseStat(normalized=text, frequency=count, exemplars=exemplars[text])
        for text, count in counts.items()
    ]
    stats.sort(key=lambda s: (-s.frequency, s.normalized))
    return stats
