"""Global and windowed-local self-attention saliency of candidate occurrences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATTENTION_MODES = ("full", "global", "local", "off")

FIRST, INTERMEDIATE, LAST, ONLY = "first", "intermediate", "last", "only"


def select_layer(attentions: np.ndarray, layer: int) -> np.ndarray:
    """Head-average one layer of a (layers, heads, N, N) attention stack."""
    if not 0 <= layer < attentions.shape[0]:
        raise IndexError(f"layer {layer} out of range [0, {attentions.shape[0]})")
    return attentions[layer].mean(axis=0)


def global_score(A: np.ndarray, indices) -> float:
    """Column sums of ``A`` over the candidate's tokens, averaged over those tokens."""
    indices = np.asarray(list(indices), dtype=int)
    if indices.size == 0:
        raise ValueError("candidate has no tokens")
    return float(A[:, indices].sum(axis=0).mean())


@dataclass(frozen=True)
class Block:
    index: int
    center: int
    sentence_range: tuple[int, int]  # inclusive, clipped to the document
    kind: str
    char_span: tuple[int, int] = (0, 0)

    def scores_sentence(self, sentence: int) -> bool:
        if self.kind == ONLY:
            return True
        if self.kind == FIRST:
            return sentence <= self.center
        if self.kind == LAST:
            return sentence >= self.center
        return sentence == self.center


def build_blocks(sentences, w: int = 1) -> list[Block]:
    """One overlapping block of ``2w + 1`` sentences centred on every sentence.

    ``sentences`` is a sequence of character spans (or just a count).
    """
    if w < 1:
        raise ValueError("window size must be >= 1")
    spans = [(0, 0)] * sentences if isinstance(sentences, int) else list(sentences)
    count = len(spans)
    blocks = []
    for k in range(count):
        lo, hi = max(0, k - w), min(count - 1, k + w)
        if count == 1:
            kind = ONLY
        elif k == 0:
            kind = FIRST
        elif k == count - 1:
            kind = LAST
        else:
            kind = INTERMEDIATE
        blocks.append(Block(k, k, (lo, hi), kind, (spans[lo][0], spans[hi][1])))
    return blocks


def owning_block(blocks: list[Block], sentence: int) -> Block:
    owners = [b for b in blocks if b.scores_sentence(sentence)]
    if len(owners) != 1:
        raise ValueError(f"sentence {sentence} is scored by {len(owners)} blocks")
    return owners[0]


def local_score(block_sam: np.ndarray, indices, sentence: int, block: Block) -> float:
    """Block-level analogue of ``global_score``; zero outside the block's scoring range."""
    if not block.scores_sentence(sentence):
        return 0.0
    return global_score(block_sam, indices)


def combine(g: float, l: float, mode: str = "full") -> float:
    if g < 0 or l < 0:
        raise ValueError("attention scores must be non-negative")
    if mode == "full":
        return g * l
    if mode == "global":
        return g
    if mode == "local":
        return l
    if mode == "off":
        return 0.0
    raise ValueError(f"unknown attention mode {mode!r}; valid: {', '.join(ATTENTION_MODES)}")


@dataclass(frozen=True)
class AttentionScore:
    global_score: float
    local_score: float
    block_index: int
    layer: int

    @property
    def combined(self) -> float:
        return self.global_score * self.local_score
