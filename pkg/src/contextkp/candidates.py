"""Tokenization, POS tagging and noun-phrase candidate extraction."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from .corpus import Document, Span, word_tokenize
from .lexicon import LexiconTagger
from .porter import stem_phrase

# <NN.*|JJ>*<NN.*> over a one-letter-per-tag encoding
_PATTERN = re.compile(r"[NJ]*N")


class Tagger(Protocol):
    def tag(self, words: Sequence[str]) -> list[str]: ...


class TaggingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    char_span: Span
    pos_tag: str
    sentence_index: int


@dataclass(frozen=True)
class CandidateOccurrence:
    surface: str
    stemmed: str
    word_span: tuple[int, int]  # inclusive token indices
    sentence_index: int
    char_span: Span
    occurrence_id: int

    @property
    def length(self) -> int:
        return self.word_span[1] - self.word_span[0] + 1


def _encode(tag: str) -> str:
    if tag.startswith("NN"):
        return "N"
    if tag == "JJ":
        return "J"
    return "x"


def chunk_candidates(tags: Sequence[str]) -> list[tuple[int, int]]:
    """Leftmost-longest non-overlapping matches of ``<NN.*|JJ>*<NN.*>``.

    Returns inclusive ``(first, last)`` token indices.
    """
    encoded = "".join(_encode(t) for t in tags)
    return [(m.start(), m.end() - 1) for m in _PATTERN.finditer(encoded)]


def tokenize_and_tag(document: Document, tagger: Tagger | None = None) -> list[Token]:
    tagger = tagger or LexiconTagger()
    sentences = document.sentences or ([(0, len(document.text))] if document.text.strip() else [])
    tokens: list[Token] = []
    for si, (s, e) in enumerate(sentences):
        words = [(w, (a + s, b + s)) for w, (a, b) in word_tokenize(document.text[s:e])]
        if not words:
            continue
        try:
            tags = tagger.tag([w for w, _ in words])
        except Exception as exc:
            raise TaggingError(f"tagger failed on document {document.id}: {exc}") from exc
        if len(tags) != len(words):
            raise TaggingError(
                f"tagger returned {len(tags)} tags for {len(words)} tokens in document {document.id}"
            )
        tokens.extend(Token(w, span, t, si) for (w, span), t in zip(words, tags))
    return tokens


def enumerate_occurrences(
    document: Document, tokens: Sequence[Token], spans: Sequence[tuple[int, int]]
) -> list[CandidateOccurrence]:
    """One occurrence per chunk; chunks that cross a sentence break are split and re-chunked."""
    pieces: list[tuple[int, int]] = []
    for first, last in spans:
        start = first
        for i in range(first + 1, last + 2):
            if i == last + 1 or tokens[i].sentence_index != tokens[start].sentence_index:
                sub = chunk_candidates([t.pos_tag for t in tokens[start:i]])
                pieces.extend((start + a, start + b) for a, b in sub)
                start = i
    occurrences = []
    for first, last in sorted(pieces):
        words = tokens[first : last + 1]
        cs, ce = words[0].char_span[0], words[-1].char_span[1]
        occurrences.append(
            CandidateOccurrence(
                surface=document.text[cs:ce],
                stemmed=stem_phrase(t.surface for t in words),
                word_span=(first, last),
                sentence_index=words[0].sentence_index,
                char_span=(cs, ce),
                occurrence_id=len(occurrences),
            )
        )
    return occurrences


def generate_candidates(document: Document, tagger: Tagger | None = None) -> list[CandidateOccurrence]:
    tokens = tokenize_and_tag(document, tagger)
    spans = chunk_candidates([t.pos_tag for t in tokens])
    return enumerate_occurrences(document, tokens, spans)
