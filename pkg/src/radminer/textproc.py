"""Deterministic linguistic substrate: tokenizer, POS tagger, lemmatizer, stopwords.

Everything here is rule-table driven so that downstream phrase extraction has
golden-file semantics: same sentence in, same tokens/tags/lemmas out, on any
machine. The tagger is a lexicon lookup with a fixed suffix-rule cascade behind
it; it only needs to be right enough for coarse noun-phrase chunking, not for
full treebank fidelity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping


class Tag(str, Enum):
    DET = "DET"
    ADJ = "ADJ"
    NOUN = "NOUN"
    NOUN_PL = "NOUN_PL"
    PROPN = "PROPN"
    VERB = "VERB"
    VBG = "VBG"
    VBN = "VBN"
    ADP = "ADP"
    CONJ = "CONJ"
    NUM = "NUM"
    PUNCT = "PUNCT"
    OTHER = "OTHER"


NOUN_TAGS = frozenset({Tag.NOUN, Tag.NOUN_PL, Tag.PROPN})

# Sentence-boundary suppression list, shared with the corpus segmenter and the
# tokenizer (tokens on this list keep their trailing period).
ABBREVIATIONS = (
    "fig.",
    "figs.",
    "dr.",
    "e.g.",
    "i.e.",
    "et al.",
    "al.",
    "vs.",
    "no.",
    "approx.",
    "eq.",
    "eqs.",
    "ref.",
    "refs.",
    "cf.",
    "etc.",
)

_PUNCT_CHARS = set(".,;:!?()[]{}<>\"'`%*&#@/\\|~^+=‘’“”…–—-")
_PEEL_CHARS = _PUNCT_CHARS - {"-"}  # hyphenated compounds stay atomic
_NUM_RE = re.compile(r"^\d+(?:[.,]\d+)*$")

_NOUN_SUFFIXES = ("tion", "sis", "oma", "itis", "gram", "pathy")
_ADJ_SUFFIXES = ("al", "ous", "ar", "ic")


@dataclass(frozen=True)
class Token:
    """A surface token with its character span inside the sentence."""

    text: str
    start: int
    end: int
    tag: Tag | None = None


@dataclass(frozen=True)
class Lexicon:
    """Immutable surface-form -> tag map backing the tagger."""

    entries: Mapping[str, Tag]
    version: str = "0"

    def lookup(self, surface: str) -> Tag | None:
        return self.entries.get(surface.lower())

    def __contains__(self, surface: str) -> bool:
        return surface.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Lexicon":
        entries: dict[str, Tag] = {}
        version = "0"
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                match = re.search(r"version:\s*(\S+)", line)
                if match:
                    version = match.group(1)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"lexicon line {lineno}: expected 'surface<TAB>tag', got {line!r}")
            surface, tag = parts
            entries[surface.lower()] = Tag(tag)
        return cls(entries=entries, version=version)

    @classmethod
    def from_file(cls, path: Path) -> "Lexicon":
        with open(path, encoding="utf-8") as handle:
            return cls.from_lines(handle)


def _data_text(name: str) -> str:
    return resources.files("radminer.data").joinpath(name).read_text(encoding="utf-8")


_bundled_lexicon: Lexicon | None = None
_bundled_stopwords: frozenset[str] | None = None
_bundled_exceptions: dict[str, str] | None = None


def bundled_lexicon() -> Lexicon:
    global _bundled_lexicon
    if _bundled_lexicon is None:
        _bundled_lexicon = Lexicon.from_lines(_data_text("lexicon.tsv").splitlines())
    return _bundled_lexicon


def bundled_stopwords() -> frozenset[str]:
    global _bundled_stopwords
    if _bundled_stopwords is None:
        words = set()
        for line in _data_text("stopwords.txt").splitlines():
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word)
        _bundled_stopwords = frozenset(words)
    return _bundled_stopwords


def bundled_lemma_exceptions() -> dict[str, str]:
    global _bundled_exceptions
    if _bundled_exceptions is None:
        table: dict[str, str] = {}
        for line in _data_text("lemma_exceptions.tsv").splitlines():
            line = line.rstrip()
            if not line or line.startswith("#"):
                continue
            surface, lemma = line.split("\t")
            table[surface] = lemma
        _bundled_exceptions = table
    return _bundled_exceptions


def radiology_vocabulary() -> tuple[str, ...]:
    """The bundled radiology term list the lexicon is required to cover."""
    terms = []
    for line in _data_text("radiology_vocab.txt").splitlines():
        term = line.strip()
        if term and not term.startswith("#"):
            terms.append(term)
    return tuple(terms)


def _is_abbreviation(chunk: str) -> bool:
    return chunk.lower() in ABBREVIATIONS


def tokenize(text: str) -> list[Token]:
    """Split a sentence into tokens, peeling punctuation off word edges.

    Hyphenated compounds ("ground-glass") stay single tokens; a possessive
    "'s" is split off as its own token; tokens on the abbreviation list keep
    their trailing period.
    """
    tokens: list[Token] = []
    for match in re.finditer(r"\S+", text):
        chunk = match.group()
        start = match.start()
        end = match.end()
        # Leading punctuation, one char at a time.
        while chunk and chunk[0] in _PEEL_CHARS:
            tokens.append(Token(chunk[0], start, start + 1))
            chunk = chunk[1:]
            start += 1
        # Trailing punctuation, peeled in reverse then re-emitted in order.
        trailing: list[Token] = []
        while chunk and chunk[-1] in _PEEL_CHARS:
            if chunk[-1] == "." and _is_abbreviation(chunk):
                break
            trailing.append(Token(chunk[-1], end - 1, end))
            chunk = chunk[:-1]
            end -= 1
        if chunk:
            for suffix in ("'s", "’s"):
                if chunk.lower().endswith(suffix) and len(chunk) > 2:
                    tokens.append(Token(chunk[:-2], start, end - 2))
                    tokens.append(Token(chunk[-2:], end - 2, end))
                    break
            else:
                tokens.append(Token(chunk, start, end))
        tokens.extend(reversed(trailing))
    return tokens


def _suffix_tag(text: str, position: int) -> Tag:
    lower = text.lower()
    if lower.endswith(_NOUN_SUFFIXES):
        return Tag.NOUN
    if lower.endswith("s") and lower[:-1].endswith(_NOUN_SUFFIXES):
        return Tag.NOUN_PL
    if lower.endswith("ing"):
        return Tag.VBG
    if lower.endswith("ed"):
        return Tag.VBN
    if lower.endswith(_ADJ_SUFFIXES):
        return Tag.ADJ
    if position > 0 and text[:1].isupper():
        return Tag.PROPN
    if _NUM_RE.match(text):
        return Tag.NUM
    if all(ch in _PUNCT_CHARS for ch in text):
        return Tag.PUNCT
    return Tag.OTHER


def pos_tag(tokens: list[Token], lexicon: Lexicon | None = None) -> list[Token]:
    """Tag tokens via lexicon lookup, falling back to the suffix-rule cascade."""
    if lexicon is None:
        lexicon = bundled_lexicon()
    tagged: list[Token] = []
    for position, token in enumerate(tokens):
        tag = lexicon.lookup(token.text)
        if tag is None:
            tag = _suffix_tag(token.text, position)
        tagged.append(replace(token, tag=tag))
    return tagged


def _plural_rules(text: str) -> str:
    """Plural-reduction cascade; only consulted for words absent from the exception table."""
    if text.endswith("ies") and len(text) > 3:
        return text[:-3] + "y"
    if text.endswith("ses") and len(text) > 4:
        return text[:-3] + "sis"
    if text.endswith("i") and len(text) > 2:
        return text[:-1] + "us"
    # Latin "-a" plurals reduce to "-um" only through the exception table.
    if text.endswith("es") and len(text) > 3 and text[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return text[:-2]
    if text.endswith("s") and not text.endswith("ss") and len(text) > 2:
        return text[:-1]
    return text


def lemmatize(text: str, tag: Tag, exceptions: Mapping[str, str] | None = None) -> str:
    """Reduce a plural noun to its lemma; every other tag passes through unchanged.

    Expects lowercased input. The exception table always wins over the rule
    cascade.
    """
    if tag is not Tag.NOUN_PL:
        return text
    if exceptions is None:
        exceptions = bundled_lemma_exceptions()
    if text in exceptions:
        return exceptions[text]
    return _plural_rules(text)


def is_stopword(word: str) -> bool:
    """Membership in the bundled stopword list; expects lowercased input."""
    return word in bundled_stopwords()
