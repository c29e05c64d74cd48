import math

import numpy as np
import pytest

from contextkp.backbone import (
    DECODER_ONLY,
    ENCODER_DECODER,
    EmptyEncodingError,
    HookShapeError,
    StubBackbone,
    align_word_span,
    encode_document,
    identity_hook,
    score_with_hook,
)
from contextkp.backbone.base import BackboneHandle, TemplateRender, locate_candidate

TEXT = "Graph networks learn node features. The features drive ranking."
TEMPLATE = "This book mainly talks about {candidate}."


def test_same_seed_is_bit_identical(stub):
    other = StubBackbone(stub.handle.architecture)
    a, b = stub.encode_document(TEXT), other.encode_document(TEXT)
    assert np.array_equal(a.attentions, b.attentions)
    t = stub.render_template(TEMPLATE, "node features")
    assert np.array_equal(stub.template_log_probs(a, t), other.template_log_probs(b, t))


def test_different_seed_differs():
    a = StubBackbone(seed=0).encode_document(TEXT)
    b = StubBackbone(seed=1).encode_document(TEXT)
    assert not np.allclose(a.attentions, b.attentions)


def test_attention_maps_are_row_stochastic(stub):
    enc = stub.encode_document(TEXT)
    L, H, N, _ = enc.attentions.shape
    assert (L, H) == (stub.handle.num_layers, stub.handle.num_heads)
    assert np.allclose(enc.attentions.sum(-1), 1.0)
    if stub.handle.architecture == DECODER_ONLY:
        assert np.all(np.triu(enc.attentions, 1) == 0)


def test_template_render_locates_candidate(stub):
    t = stub.render_template(TEMPLATE, "node features")
    assert t.text == "This book mainly talks about node features."
    assert (t.start, t.length) == (5, 2)


def test_underscore_splits_subwords(stub):
    t = stub.render_template(TEMPLATE, "graph_net")
    assert t.length == 2


@pytest.mark.parametrize("arch", [ENCODER_DECODER, DECODER_ONLY])
@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_uniform_output_gives_closed_form_score(arch, alpha):
    bb = StubBackbone(arch, uniform_output=True)
    enc = bb.encode_document(TEXT)
    t = bb.render_template(TEMPLATE, "graph network learning")
    expected = -t.length * math.log(bb.vocab_size) / t.length**alpha
    assert score_with_hook(bb, enc, t, None, alpha) == pytest.approx(expected, abs=1e-12)


def test_identity_hook_equals_no_hook(stub):
    enc = stub.encode_document(TEXT)
    t = stub.render_template(TEMPLATE, "node features")
    assert np.array_equal(stub.template_log_probs(enc, t, None), stub.template_log_probs(enc, t, identity_hook))


def test_hook_sees_every_layer_and_head_with_expected_shape(stub):
    enc = stub.encode_document(TEXT)
    t = stub.render_template(TEMPLATE, "node features")
    seen = []

    def hook(layer, head, scores):
        seen.append((layer, head, scores.shape, bool(np.isfinite(scores).all())))
        return scores

    stub.template_log_probs(enc, t, hook)
    n, m = enc.n_tokens, t.n_tokens
    shape = (m, n) if stub.handle.architecture == ENCODER_DECODER else (n + m, n + m)
    L, H = stub.handle.num_layers, stub.handle.num_heads
    assert seen == [(l, h, shape, True) for l in range(L) for h in range(H)]


def test_hook_changes_the_score(stub):
    enc = stub.encode_document(TEXT)
    t = stub.render_template(TEMPLATE, "node features")
    base = stub.template_log_probs(enc, t)
    damped = stub.template_log_probs(enc, t, lambda l, h, s: s * 0.0)
    assert not np.allclose(base, damped)


def test_bad_hook_shape_is_rejected(stub):
    enc = stub.encode_document(TEXT)
    t = stub.render_template(TEMPLATE, "node features")
    with pytest.raises(HookShapeError):
        stub.template_log_probs(enc, t, lambda l, h, s: s[:-1])


def test_causality_survives_any_hook():
    bb = StubBackbone(DECODER_ONLY)
    enc = bb.encode_document(TEXT)
    t = bb.render_template(TEMPLATE, "node features")
    for probs in bb.attention_probs(enc, t, lambda l, h, s: np.abs(s) * 5.0):
        assert np.all(np.triu(probs, 1) == 0)


def test_truncation():
    bb = StubBackbone(max_tokens=4)
    enc = bb.encode_document(TEXT)
    assert enc.truncated and enc.n_tokens == 4
    assert align_word_span(enc, (TEXT.index("features"), TEXT.index("features") + 8)) == []


def test_empty_encoding_is_an_error():
    with pytest.raises(EmptyEncodingError, match="empty encoding"):
        encode_document(StubBackbone(), "   ")


def test_locate_candidate_skips_special_tokens():
    offsets = [(0, 0), (0, 4), (5, 9), (0, 0)]
    assert locate_candidate(offsets, 5, 9) == (2, 1)
    with pytest.raises(ValueError):
        locate_candidate(offsets, 20, 22)


def test_handle_and_render_validation():
    with pytest.raises(ValueError):
        BackboneHandle("rnn", 1, 1, 1)
    with pytest.raises(ValueError):
        TemplateRender("x", (1, 2), 1, 2)
