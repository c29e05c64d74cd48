"""Final occurrence scores and candidate-level ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .candidates import CandidateOccurrence
from .corpus import RankedCandidate


def final_score(p_c: float, attention: float, lam: float) -> float:
    """``p_c / (1 + ln(1 + lam * attention))``."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    if attention < 0:
        raise ValueError(f"attention score must be non-negative, got {attention}")
    return p_c / (1.0 + math.log1p(lam * attention))


@dataclass(frozen=True)
class ScoreRecord:
    occurrence_id: int
    p_c: float
    global_score: float = 0.0
    local_score: float = 0.0
    attention: float = 0.0
    final: float = 0.0
    block_index: int = -1
    layer: int = -1


def dedup_and_rank(
    records: Iterable[ScoreRecord],
    occurrences: dict[int, CandidateOccurrence] | Iterable[CandidateOccurrence],
    n_top: int | None = None,
) -> list[RankedCandidate]:
    """Best occurrence per stemmed form, sorted by score.

    Ties go to the earlier document position, then the smaller stemmed form.
    """
    if not isinstance(occurrences, dict):
        occurrences = {o.occurrence_id: o for o in occurrences}
    best: dict[str, tuple[float, int, CandidateOccurrence]] = {}
    for rec in records:
        occ = occurrences[rec.occurrence_id]
        key = (rec.final, -occ.char_span[0])
        cur = best.get(occ.stemmed)
        if cur is None or key > (cur[0], -cur[1]):
            best[occ.stemmed] = (rec.final, occ.char_span[0], occ)
    ranked = sorted(best.values(), key=lambda t: (-t[0], t[1], t[2].stemmed))
    if n_top is not None:
        ranked = ranked[:n_top]
    return [RankedCandidate(o.surface, o.stemmed, s, pos) for s, pos, o in ranked]


def rerank(ranked: list[RankedCandidate], n_top: int | None = None) -> list[RankedCandidate]:
    """Apply the dedup/tie rules to an already-ranked list (idempotent)."""
    best: dict[str, RankedCandidate] = {}
    for c in ranked:
        cur = best.get(c.stemmed)
        if cur is None or (c.score, -c.position) > (cur.score, -cur.position):
            best[c.stemmed] = c
    out = sorted(best.values(), key=lambda c: (-c.score, c.position, c.stemmed))
    return out if n_top is None else out[:n_top]
