from .base import (
    ARCHITECTURES,
    DECODER_ONLY,
    DEFAULT_TEMPLATE,
    ENCODER_DECODER,
    AttentionHook,
    Backbone,
    BackboneHandle,
    EmptyEncodingError,
    EncodedDocument,
    HookShapeError,
    TemplateRender,
    align_word_span,
    apply_hook,
    embed_span,
    encode_document,
    identity_hook,
    score_with_hook,
)
from .stub import StubBackbone

__all__ = [
    "ARCHITECTURES",
    "DECODER_ONLY",
    "DEFAULT_TEMPLATE",
    "ENCODER_DECODER",
    "AttentionHook",
    "Backbone",
    "BackboneHandle",
    "EmptyEncodingError",
    "EncodedDocument",
    "HookShapeError",
    "StubBackbone",
    "TemplateRender",
    "align_word_span",
    "apply_hook",
    "embed_span",
    "encode_document",
    "identity_hook",
    "make_backbone",
    "make_span_encoder",
    "score_with_hook",
]

STUB = "stub"


def make_backbone(name: str = STUB, architecture: str = ENCODER_DECODER, *, seed: int = 0, max_tokens: int = 512) -> Backbone:
    """``"stub"`` or a Hugging Face checkpoint id (needs the ``hf`` extra)."""
    if name == STUB:
        return StubBackbone(architecture, seed=seed, max_tokens=max_tokens)
    from .hf import HFDecoderOnly, HFEncoderDecoder

    cls = HFEncoderDecoder if architecture == ENCODER_DECODER else HFDecoderOnly
    return cls.from_pretrained(name, max_tokens=max_tokens)


def make_span_encoder(name: str, max_tokens: int = 512):
    """Separate embedding model for neighbour selection; ``"backbone"`` means none."""
    if name == "backbone":
        return None
    from .hf import HFSpanEncoder

    return HFSpanEncoder.from_pretrained(name, max_tokens=max_tokens)
