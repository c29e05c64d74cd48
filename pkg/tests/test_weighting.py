import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from contextkp.backbone import DECODER_ONLY, ENCODER_DECODER, StubBackbone
from contextkp.backbone.base import TemplateRender
from contextkp.weighting import (
    GaussianSchedule,
    MixtureSpec,
    adjust_logits,
    alignment_scores,
    build_hook,
    build_weights,
    expand_weight,
    final_weight,
    mixture_weight,
    normalized_center,
    select_semantic_neighbors,
    token_positions,
    top_k_attn,
    vanilla_weight,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
unit = st.floats(0.0, 1.0, allow_nan=False)


def gaussian_oracle(mu, sigma, n):
    return [math.exp(-(((j + 0.5) / n - mu) ** 2) / (2 * sigma * sigma)) for j in range(n)]


@given(st.integers(1, 60), st.floats(0.0, 1.0), st.floats(0.01, 3.0))
def test_vanilla_matches_scalar_oracle(n, mu, sigma):
    assert np.allclose(vanilla_weight(mu, sigma, n), gaussian_oracle(mu, sigma, n), rtol=0, atol=1e-15)


@given(st.integers(0, 30), st.floats(0.01, 2.0))
def test_peak_symmetry_and_decay(half, sigma):
    n = 2 * half + 1
    mu = normalized_center([half], n)
    w = vanilla_weight(mu, sigma, n)
    assert w[half] == 1.0
    assert np.max(np.abs(w - w[::-1])) <= 1e-12
    assert np.all(np.diff(w[half:]) <= 0) and np.all(np.diff(w[: half + 1]) >= 0)
    assert np.all((w >= 0) & (w <= 1))  # far tails may underflow to 0


def test_sigma_schedule():
    s = GaussianSchedule(0.3, 0.1)
    assert [s.sigma(l) for l in range(3)] == [0.3, 0.4, 0.5]
    with pytest.raises(ValueError):
        GaussianSchedule(0.0, 0.1)
    with pytest.raises(ValueError):
        GaussianSchedule(0.3, -0.1)


def test_default_mixture_sums_to_one_exactly():
    spec = MixtureSpec.uniform(0.7, 0.1, 3)
    assert spec.total() == 1.0
    assert 0.7 + 3 * 0.1 == 1.0


def test_mixture_rejects_bad_coefficients():
    with pytest.raises(ValueError):
        MixtureSpec(0.7, (0.1, 0.1))
    with pytest.raises(ValueError):
        MixtureSpec(1.1, (-0.1,))


@given(st.integers(1, 50), st.floats(0.0, 1.0), st.floats(0.01, 2.0))
def test_coincident_components_reduce_to_vanilla(n, mu, sigma):
    spec = MixtureSpec()
    assert np.max(np.abs(mixture_weight(mu, [mu] * 3, spec, sigma, n) - vanilla_weight(mu, sigma, n))) <= 1e-12


@given(st.integers(1, 50), st.floats(0, 1), st.lists(st.floats(0, 1), max_size=3), st.floats(0.01, 2.0))
def test_mixture_is_bounded_and_matches_oracle(n, mu, others, sigma):
    spec = MixtureSpec()
    w = mixture_weight(mu, others, spec, sigma, n)
    assert np.all((w >= 0) & (w <= 1))
    used = spec.restrict(len(others))
    oracle = np.array(gaussian_oracle(mu, sigma, n)) * used.pi_c
    for pi, m in zip(used.pi_neighbors, others):
        oracle = oracle + pi * np.array(gaussian_oracle(m, sigma, n))
    assert np.allclose(w, np.clip(oracle, 0, 1), atol=1e-14)


def test_restrict_spreads_neighbour_mass():
    spec = MixtureSpec()
    assert spec.restrict(3) is spec
    two = spec.restrict(2)
    assert two.pi_c == 0.7 and two.pi_neighbors == pytest.approx((0.15, 0.15))
    assert spec.restrict(0) == MixtureSpec(1.0, ())


def neighbours_oracle(form, forms, k, emb):
    sims = []
    for i, f in enumerate(forms):
        if f == form or not np.linalg.norm(emb[f]):
            continue
        a, b = emb[form], emb[f]
        sims.append((-(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)), i, f))
    return [f for _, _, f in sorted(sims)[:k]]


@given(st.integers(2, 12), st.integers(0, 5), st.randoms())
@settings(max_examples=200)
def test_neighbour_selection_matches_oracle(n_forms, k, rnd):
    forms = [f"f{i}" for i in range(n_forms)]
    emb = {f: np.array([rnd.choice([-1, 0, 1, 2]) for _ in range(3)], float) for f in forms}
    if not np.linalg.norm(emb["f0"]):
        assert select_semantic_neighbors("f0", forms, k, emb) == []
    else:
        assert select_semantic_neighbors("f0", forms, k, emb) == neighbours_oracle("f0", forms, k, emb)


def test_neighbour_ties_go_to_earlier_form():
    emb = {"a": np.array([1.0, 0]), "b": np.array([0.0, 1]), "c": np.array([0.0, 2])}
    assert select_semantic_neighbors("a", ["a", "c", "b"], 1, emb) == ["c"]


def test_alignment_rows_per_architecture():
    S = np.arange(20.0).reshape(4, 5)
    assert np.array_equal(alignment_scores(S, 1, 2, ENCODER_DECODER), S[1:3].sum(0))
    S2 = np.arange(36.0).reshape(6, 6)
    assert np.array_equal(alignment_scores(S2, 0, 2, DECODER_ONLY, n_doc=3), S2[3:5, :3].sum(0))
    with pytest.raises(IndexError):
        alignment_scores(S, 3, 2, ENCODER_DECODER)


@given(arrays(float, st.integers(1, 40), elements=st.integers(-5, 5).map(float)), st.integers(0, 45))
def test_top_k_matches_sort_oracle(v, k):
    oracle = sorted(sorted(range(len(v)), key=lambda i: (-v[i], i))[:k])
    assert top_k_attn(v, k).tolist() == oracle


@given(
    st.integers(1, 6).flatmap(
        lambda n: st.tuples(
            arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=unit), arrays(float, (n, n), elements=unit)
        )
    )
)
@settings(max_examples=300)
def test_adjusted_logits_are_bounded_and_monotone(args):
    S, W1, W2 = args
    adj = adjust_logits(S, W1)
    assert np.all(adj >= np.minimum(0, S)) and np.all(adj <= np.maximum(0, S))
    lo, hi = np.minimum(W1, W2), np.maximum(W1, W2)
    assert np.all(adjust_logits(S, lo) <= adjust_logits(S, hi))


def test_adjust_logits_validates_inputs():
    with pytest.raises(ValueError):
        adjust_logits(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        adjust_logits(np.zeros(2), np.array([0.5, 1.5]))


def test_decoder_only_expansion_touches_only_lower_left_block():
    W = expand_weight(np.array([0.2, 0.5, 0.9]), DECODER_ONLY, m=2, n=3)
    assert W.shape == (5, 5)
    non_unit = np.argwhere(W != 1.0)
    assert {tuple(x) for x in non_unit} == {(i, j) for i in (3, 4) for j in range(3)}


def test_encoder_decoder_expansion_repeats_rows():
    W = expand_weight(np.array([0.2, 0.5]), ENCODER_DECODER, m=3, n=2)
    assert W.shape == (3, 2) and np.all(W == [0.2, 0.5])


def test_final_weight_sets_aligned_to_one():
    assert final_weight(np.array([0.1, 0.2, 0.3]), [0, 2]).tolist() == [1.0, 0.2, 1.0]


def _weights(mode, n=6, layers=2):
    return build_weights(0.5, [0.1], spec=MixtureSpec(), schedule=GaussianSchedule(0.3, 0.2), num_layers=layers, n=n, mode=mode)


def test_build_weights_per_mode():
    v = _weights("vanilla_only")
    assert v.mixture is v.vanilla
    m = _weights("full")
    assert not np.allclose(m.mixture, m.vanilla)
    assert np.all(m.vanilla[1] >= m.vanilla[0])  # wider spread in the deeper layer


@pytest.mark.parametrize("mode", ["vanilla_only", "vanilla+aligned", "vanilla+mixture", "full"])
def test_traced_hook_records_final_weights(mode):
    n, m = 6, 4
    tpl = TemplateRender("t", (1, 2, 3, 4), 1, 2)
    w = _weights(mode, n)
    hook = build_hook(w, tpl, mode=mode, k_attn=2, architecture=ENCODER_DECODER, trace=True)
    rng = np.random.default_rng(0)
    S = rng.normal(size=(m, n))
    out = hook(1, 0, S)
    final = w.final[1, 0]
    assert np.array_equal(out, adjust_logits(S, np.broadcast_to(final, (m, n))))
    if "aligned" in mode or mode == "full":
        aligned = w.aligned[1, 0]
        assert aligned.tolist() == top_k_attn(S[1:3].sum(0), 2).tolist()
        assert np.all(final[aligned] == 1.0)
    else:
        assert np.array_equal(final, w.mixture[1])
    with pytest.raises(KeyError):
        hook(5, 0, S)


def test_off_mode_hook_is_identity():
    tpl = TemplateRender("t", (1, 2), 0, 1)
    hook = build_hook(_weights("off"), tpl, mode="off", k_attn=3, architecture=ENCODER_DECODER)
    S = np.ones((2, 6))
    assert hook(0, 0, S) is S


def test_hook_on_stub_keeps_scores_finite():
    bb = StubBackbone(DECODER_ONLY)
    enc = bb.encode_document("Graph networks learn features.")
    tpl = bb.render_template("About {candidate}.", "graph networks")
    w = build_weights(0.2, [], spec=MixtureSpec(), schedule=GaussianSchedule(), num_layers=2, n=enc.n_tokens, mode="full")
    hook = build_hook(w, tpl, mode="full", k_attn=2, architecture=DECODER_ONLY)
    assert np.all(np.isfinite(bb.template_log_probs(enc, tpl, hook)))
    assert np.all(token_positions(4) == [0.125, 0.375, 0.625, 0.875])
