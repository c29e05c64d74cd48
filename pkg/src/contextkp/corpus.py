"""Dataset loading, sentence segmentation and result persistence."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .porter import stem_phrase

Span = tuple[int, int]
Segmenter = Callable[[str], list[Span]]


class DatasetError(ValueError):
    pass


# lower-cased tokens that may precede a period without ending a sentence
ABBREVIATIONS = frozenset(
    """
    mr mrs ms dr prof sr jr st mt inc ltd co corp bros vs etc al fig figs eq eqs
    no nos vol vols pp ed eds dept univ gen gov sen rep col lt sgt capt cmdr adm
    jan feb mar apr jun jul aug sep sept oct nov dec approx est cf ca e.g i.e u.s
    u.k u.n a.m p.m
    """.split()
)

_WORD_RE = re.compile(r"\w+(?:-\w+)*|['’]s\b|[^\w\s]")
_TERMINATOR_RE = re.compile(r"[.!?]+['\"’”)\]]*")
_PARAGRAPH_RE = re.compile(r"\n[ \t]*\n")


def word_tokenize(text: str) -> list[tuple[str, Span]]:
    """Split text into words and punctuation with character spans."""
    return [(m.group(), (m.start(), m.end())) for m in _WORD_RE.finditer(text)]


def normalize_phrase(phrase: str) -> str:
    """Case-fold and stem a phrase the same way candidates are stemmed."""
    return stem_phrase(w for w, _ in word_tokenize(phrase))


def _is_abbreviation(text: str, dot: int) -> bool:
    m = re.search(r"([\w.]+)$", text[:dot])
    if not m:
        return False
    token = m.group(1).lower().rstrip(".")
    if len(token) == 1 and token.isalpha():
        # single-letter initials such as "A. B. Smith"
        return True
    return token in ABBREVIATIONS


def _split_paragraph(text: str, start: int, end: int) -> list[Span]:
    spans: list[Span] = []
    cursor = start
    for m in _TERMINATOR_RE.finditer(text, start, end):
        stop = m.end()
        nxt = stop
        while nxt < end and text[nxt].isspace():
            nxt += 1
        if nxt == stop and stop < end:
            continue  # "3.5", "e.g.x": no whitespace after the terminator
        if m.group().rstrip("'\"’”)]") == "." and _is_abbreviation(text, m.start()):
            continue
        if nxt < end and text[nxt].islower():
            continue
        spans.append((cursor, stop))
        cursor = nxt
    if cursor < end:
        spans.append((cursor, end))
    return spans


def segment_sentences(text: str) -> list[Span]:
    """Rule-based sentence splitter.

    Splits after ``.``, ``!`` or ``?`` followed by whitespace and a
    non-lower-case character, unless the period closes a known abbreviation or
    a single-letter initial.  Blank lines always end a sentence, so headings
    separated by a blank line become sentences of their own.  Returned spans
    are stripped of surrounding whitespace.
    """
    spans: list[Span] = []
    para_start = 0
    bounds = [(m.start(), m.end()) for m in _PARAGRAPH_RE.finditer(text)]
    bounds.append((len(text), len(text)))
    for para_end, next_start in bounds:
        for s, e in _split_paragraph(text, para_start, para_end):
            while s < e and text[s].isspace():
                s += 1
            while e > s and text[e - 1].isspace():
                e -= 1
            if s < e:
                spans.append((s, e))
        para_start = next_start
    return spans


@dataclass
class Document:
    id: str
    text: str
    sentences: list[Span] = field(default_factory=list)
    gold_keyphrases: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.gold_keyphrases = dedup_keyphrases(self.gold_keyphrases)

    @property
    def gold_stemmed(self) -> list[str]:
        return [normalize_phrase(k) for k in self.gold_keyphrases]


def dedup_keyphrases(phrases: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for p in phrases:
        key = normalize_phrase(p)
        if key and key not in seen:
            seen.add(key)
            out.append(p)
    return out


@dataclass
class RankedCandidate:
    surface: str
    stemmed: str
    score: float
    position: int  # character offset of the winning occurrence


@dataclass
class ResultRecord:
    document_id: str
    ranked: list[RankedCandidate]
    hyperparameters: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "document_id": self.document_id,
            "ranked": [[c.surface, c.stemmed, c.score, c.position] for c in self.ranked],
            "hyperparameters": self.hyperparameters,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ResultRecord":
        return cls(
            document_id=obj["document_id"],
            ranked=[RankedCandidate(s, st, float(sc), int(p)) for s, st, sc, p in obj["ranked"]],
            hyperparameters=obj.get("hyperparameters", {}),
        )


def load_dataset(path, format: str = "jsonl", segmenter: Segmenter = segment_sentences) -> list[Document]:
    """Read a JSONL file with one ``{"id", "text", "keyphrases"}`` object per line."""
    if format != "jsonl":
        raise DatasetError(f"unsupported dataset format {format!r}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON at line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise DatasetError(f"expected an object at line {lineno}")
            for key in ("id", "text", "keyphrases"):
                if key not in obj:
                    raise DatasetError(f"missing field {key} at line {lineno}")
            text = obj["text"]
            docs.append(
                Document(
                    id=str(obj["id"]),
                    text=text,
                    sentences=segmenter(text),
                    gold_keyphrases=list(obj["keyphrases"]),
                )
            )
    return docs


def write_results(records: Sequence[ResultRecord], path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc


def read_results(path) -> list[ResultRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ResultRecord.from_json(json.loads(line)) for line in fh if line.strip()]
