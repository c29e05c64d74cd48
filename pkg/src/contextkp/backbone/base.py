"""Backbone-independent types and the likelihood scoring helper."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from ..corpus import Span

ENCODER_DECODER = "encoder_decoder"
DECODER_ONLY = "decoder_only"
ARCHITECTURES = (ENCODER_DECODER, DECODER_ONLY)

DEFAULT_TEMPLATE = "This book mainly talks about {candidate}."

# (layer, head, pre-softmax scores) -> adjusted scores of the same shape
AttentionHook = Callable[[int, int, np.ndarray], np.ndarray]


class EmptyEncodingError(ValueError):
    pass


class HookShapeError(ValueError):
    pass


def identity_hook(layer: int, head: int, scores: np.ndarray) -> np.ndarray:
    return scores


def apply_hook(hook: AttentionHook, layer: int, head: int, scores: np.ndarray) -> np.ndarray:
    out = np.asarray(hook(layer, head, scores))
    if out.shape != scores.shape:
        raise HookShapeError(
            f"hook returned shape {out.shape} for scores of shape {scores.shape} (layer {layer}, head {head})"
        )
    return out


@dataclass(frozen=True)
class BackboneHandle:
    architecture: str
    num_layers: int  # layers whose attention the scoring hook sees
    num_heads: int
    key_dim: int
    max_tokens: int = 512

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.num_layers < 1 or self.num_heads < 1:
            raise ValueError("num_layers and num_heads must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass
class EncodedDocument:
    """Document-side forward pass: attention maps, embeddings and offsets.

    ``attentions`` has shape (layers, heads, N, N).  Special tokens carry the
    empty offset ``(0, 0)`` and are never aligned to text.
    """

    text: str
    token_ids: np.ndarray
    offsets: list[Span]
    attentions: np.ndarray
    token_embeddings: np.ndarray
    truncated: bool = False
    state: Any = field(default=None, repr=False)

    @property
    def n_tokens(self) -> int:
        return len(self.token_ids)

    def sam(self, layer: int) -> np.ndarray:
        """Head-averaged self-attention map of one layer."""
        return self.attentions[layer].mean(axis=0)


@dataclass(frozen=True)
class TemplateRender:
    text: str
    token_ids: tuple[int, ...]
    start: int  # index of the first candidate token within the template
    length: int  # candidate length in backbone tokens

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("candidate must cover at least one template token")
        if self.start < 0 or self.start + self.length > len(self.token_ids):
            raise ValueError("candidate span lies outside the template")

    @property
    def n_tokens(self) -> int:
        return len(self.token_ids)

    def candidate_rows(self, architecture: str, n_doc: int) -> range:
        """Rows of the hooked score matrix that belong to the candidate."""
        offset = n_doc if architecture == DECODER_ONLY else 0
        return range(offset + self.start, offset + self.start + self.length)


class Backbone(Protocol):
    handle: BackboneHandle

    def encode_document(self, text: str) -> EncodedDocument: ...

    def render_template(self, template: str, candidate: str) -> TemplateRender: ...

    def template_log_probs(
        self, encoded: EncodedDocument, template: TemplateRender, hook: AttentionHook | None = None
    ) -> np.ndarray: ...


def locate_candidate(offsets, char_start: int, char_end: int) -> tuple[int, int]:
    """(first token index, token count) of the tokens overlapping a character range."""
    hits = [i for i, (s, e) in enumerate(offsets) if e > s and s < char_end and char_start < e]
    if not hits:
        raise ValueError("candidate produced no template tokens")
    return hits[0], hits[-1] - hits[0] + 1


def encode_document(backbone: Backbone, text: str) -> EncodedDocument:
    encoded = backbone.encode_document(text)
    if not any(e > s for s, e in encoded.offsets):
        raise EmptyEncodingError("empty encoding")
    return encoded


def align_word_span(encoded: EncodedDocument, char_span: Span) -> list[int]:
    """Backbone token indices whose character spans overlap ``char_span``.

    An empty list means the span was cut off by truncation.
    """
    start, end = char_span
    return [i for i, (s, e) in enumerate(encoded.offsets) if e > s and s < end and start < e]


def embed_span(encoded: EncodedDocument, indices) -> np.ndarray:
    indices = list(indices)
    if not indices:
        raise ValueError("cannot embed an empty token span")
    return encoded.token_embeddings[indices].mean(axis=0)


def score_with_hook(
    backbone: Backbone,
    encoded: EncodedDocument,
    template: TemplateRender,
    hook: AttentionHook | None,
    alpha: float,
) -> float:
    """Length-normalised log-likelihood of the candidate tokens in the template."""
    log_probs = backbone.template_log_probs(encoded, template, hook)
    span = log_probs[template.start : template.start + template.length]
    return float(np.sum(span) / template.length**alpha)
