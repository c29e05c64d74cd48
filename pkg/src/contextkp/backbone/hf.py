"""Hugging Face adapters with the attention hook spliced into the scoring pass.

Encoder-decoder models (T5 family) get their decoder cross-attention modules
replaced by a reimplementation that calls the hook between the raw scores and
the softmax.  Decoder-only models run through a registered attention function
that does the same for causal self-attention.  Both need ``torch`` and
``transformers`` (the ``hf`` extra).
"""

from __future__ import annotations

import contextvars
import logging

import numpy as np
import torch
from torch import nn
from transformers import (
    AttentionInterface,
    AutoModel,
    AutoModelForCausalLM,
    AutoModelForSeq2SeqLM,
    AutoTokenizer,
)
from transformers.masking_utils import AttentionMaskInterface, eager_mask

from .base import (
    DECODER_ONLY,
    ENCODER_DECODER,
    AttentionHook,
    BackboneHandle,
    EncodedDocument,
    TemplateRender,
    apply_hook,
    locate_candidate,
)

log = logging.getLogger(__name__)

HOOKED_ATTENTION = "contextkp_hooked"

_active_hook: contextvars.ContextVar[AttentionHook | None] = contextvars.ContextVar("contextkp_hook", default=None)


def _hook_scores(hook: AttentionHook, layer: int, scores: torch.Tensor) -> torch.Tensor:
    """Run ``hook`` on every head of a (1, heads, q, k) score tensor."""
    if scores.shape[0] != 1:
        raise ValueError("hooked attention supports batch size 1 only")
    arr = scores[0].detach().to(torch.float64).cpu().numpy()
    out = np.stack([apply_hook(hook, layer, h, arr[h]) for h in range(arr.shape[0])])
    return torch.from_numpy(out).to(dtype=scores.dtype, device=scores.device)[None]


def _hooked_attention(module, query, key, value, attention_mask, scaling, dropout=0.0, softcap=None, **kwargs):
    groups = getattr(module, "num_key_value_groups", 1)
    if groups > 1:
        key = key.repeat_interleave(groups, dim=1)
        value = value.repeat_interleave(groups, dim=1)
    scores = torch.matmul(query, key.transpose(2, 3)) * scaling
    if softcap is not None:
        scores = torch.tanh(scores / softcap) * softcap
    hook = _active_hook.get()
    if hook is not None:
        scores = _hook_scores(hook, module.layer_idx, scores)
    # the causal mask goes on after the hook so masked entries stay masked
    if attention_mask is not None:
        scores = scores + attention_mask[:, :, :, : key.shape[-2]]
    weights = nn.functional.softmax(scores, dim=-1, dtype=torch.float32).to(query.dtype)
    out = torch.matmul(weights, value).transpose(1, 2).contiguous()
    return out, weights


AttentionInterface.register(HOOKED_ATTENTION, _hooked_attention)
AttentionMaskInterface.register(HOOKED_ATTENTION, eager_mask)


class _HookedCrossAttention(nn.Module):
    """Drop-in for a T5 ``EncDecAttention`` module (no cache, batch size 1)."""

    def __init__(self, inner: nn.Module, layer: int):
        super().__init__()
        self.inner = inner
        self.layer = layer

    def forward(self, hidden_states, mask=None, key_value_states=None, position_bias=None, past_key_values=None, output_attentions=False, **kwargs):
        hook = _active_hook.get()
        if hook is None:
            return self.inner(
                hidden_states,
                mask=mask,
                key_value_states=key_value_states,
                position_bias=position_bias,
                past_key_values=past_key_values,
                output_attentions=output_attentions,
                **kwargs,
            )
        a = self.inner
        q_len, dh = hidden_states.shape[1], a.key_value_proj_dim
        q = a.q(hidden_states).view(1, q_len, -1, dh).transpose(1, 2)
        k = a.k(key_value_states).view(1, key_value_states.shape[1], -1, dh).transpose(1, 2)
        v = a.v(key_value_states).view(1, key_value_states.shape[1], -1, dh).transpose(1, 2)
        scores = _hook_scores(hook, self.layer, torch.matmul(q, k.transpose(3, 2)))
        if position_bias is None:
            position_bias = torch.zeros((1, q.shape[1], q_len, k.shape[2]), dtype=scores.dtype, device=scores.device)
            if mask is not None:
                position_bias = position_bias + mask[:, :, :, : k.shape[2]]
        weights = nn.functional.softmax((scores + position_bias).float(), dim=-1).type_as(scores)
        out = a.o(torch.matmul(weights, v).transpose(1, 2).reshape(1, q_len, -1))
        outputs = (out, position_bias)
        if output_attentions:
            outputs = outputs + (weights,)
        return outputs


class _HFBase:
    def __init__(self, model, tokenizer, architecture: str, max_tokens: int = 512):
        if not getattr(tokenizer, "is_fast", False):
            raise ValueError("a fast tokenizer is needed for character offsets")
        self.model = model.eval()
        self.tokenizer = tokenizer
        cfg = model.config
        if architecture == ENCODER_DECODER:
            layers = getattr(cfg, "num_decoder_layers", None) or cfg.num_layers
            heads, dim = cfg.num_heads, cfg.d_kv
        else:
            layers, heads = cfg.num_hidden_layers, cfg.num_attention_heads
            dim = getattr(cfg, "head_dim", None) or cfg.hidden_size // heads
        self.handle = BackboneHandle(architecture, layers, heads, dim, max_tokens)

    def _tokenize(self, text: str, special: bool, limit: int | None):
        enc = self.tokenizer(text, add_special_tokens=special, return_offsets_mapping=True)
        ids, offsets = list(enc["input_ids"]), [tuple(o) for o in enc["offset_mapping"]]
        truncated = limit is not None and len(ids) > limit
        if truncated:
            # keep trailing special tokens (e.g. EOS) at the end of the cut
            tail = 0
            while tail < len(ids) and offsets[len(ids) - 1 - tail] == (0, 0) and tail < 2:
                tail += 1
            keep = limit - tail
            ids = ids[:keep] + ids[len(ids) - tail :]
            offsets = offsets[:keep] + offsets[len(offsets) - tail :]
        return ids, offsets, truncated

    def render_template(self, template: str, candidate: str) -> TemplateRender:
        rendered = template.replace("{candidate}", candidate)
        pos = template.index("{candidate}")
        special = self.handle.architecture == ENCODER_DECODER
        ids, offsets, _ = self._tokenize(rendered, special, None)
        start, length = locate_candidate(offsets, pos, pos + len(candidate))
        return TemplateRender(rendered, tuple(ids), start, length)


class HFEncoderDecoder(_HFBase):
    def __init__(self, model, tokenizer, max_tokens: int = 512):
        super().__init__(model, tokenizer, ENCODER_DECODER, max_tokens)
        blocks = model.get_decoder().block
        for i, block in enumerate(blocks):
            attn = block.layer[1].EncDecAttention
            if not isinstance(attn, _HookedCrossAttention):
                block.layer[1].EncDecAttention = _HookedCrossAttention(attn, i)

    @classmethod
    def from_pretrained(cls, checkpoint: str, max_tokens: int = 512) -> "HFEncoderDecoder":
        tok = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint, attn_implementation="eager")
        return cls(model, tok, max_tokens)

    @torch.no_grad()
    def encode_document(self, text: str) -> EncodedDocument:
        ids, offsets, truncated = self._tokenize(text, True, self.handle.max_tokens)
        out = self.model.get_encoder()(input_ids=torch.tensor([ids]), output_attentions=True)
        attentions = torch.stack([a[0] for a in out.attentions]).double().numpy()
        hidden = out.last_hidden_state
        return EncodedDocument(
            text, np.asarray(ids), offsets, attentions, hidden[0].double().numpy(), truncated, state=hidden
        )

    @torch.no_grad()
    def template_log_probs(self, encoded: EncodedDocument, template: TemplateRender, hook: AttentionHook | None = None):
        targets = torch.tensor([template.token_ids])
        start_id = self.model.config.decoder_start_token_id
        decoder_input = torch.tensor([[start_id, *template.token_ids[:-1]]])
        token = _active_hook.set(hook)
        try:
            out = self.model(
                encoder_outputs=(encoded.state,),
                decoder_input_ids=decoder_input,
                use_cache=False,
            )
        finally:
            _active_hook.reset(token)
        logp = torch.log_softmax(out.logits.double(), dim=-1)
        return logp[0].gather(-1, targets[0][:, None])[:, 0].numpy()


class HFDecoderOnly(_HFBase):
    def __init__(self, model, tokenizer, max_tokens: int = 512):
        model.config._attn_implementation = HOOKED_ATTENTION
        super().__init__(model, tokenizer, DECODER_ONLY, max_tokens)

    @classmethod
    def from_pretrained(cls, checkpoint: str, max_tokens: int = 512) -> "HFDecoderOnly":
        tok = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForCausalLM.from_pretrained(checkpoint, attn_implementation=HOOKED_ATTENTION)
        return cls(model, tok, max_tokens)

    @torch.no_grad()
    def encode_document(self, text: str) -> EncodedDocument:
        ids, offsets, truncated = self._tokenize(text, True, self.handle.max_tokens)
        out = self.model(input_ids=torch.tensor([ids]), output_attentions=True, output_hidden_states=True, use_cache=False)
        attentions = torch.stack([a[0] for a in out.attentions]).double().numpy()
        hidden = out.hidden_states[-1][0].double().numpy()
        return EncodedDocument(text, np.asarray(ids), offsets, attentions, hidden, truncated)

    @torch.no_grad()
    def template_log_probs(self, encoded: EncodedDocument, template: TemplateRender, hook: AttentionHook | None = None):
        n = encoded.n_tokens
        ids = torch.tensor([[*encoded.token_ids.tolist(), *template.token_ids]])
        token = _active_hook.set(hook)
        try:
            out = self.model(input_ids=ids, use_cache=False)
        finally:
            _active_hook.reset(token)
        logp = torch.log_softmax(out.logits[0, n - 1 : -1].double(), dim=-1)
        targets = torch.tensor(template.token_ids)
        return logp.gather(-1, targets[:, None])[:, 0].numpy()


class HFSpanEncoder:
    """Plain encoder used only for contextual span embeddings."""

    def __init__(self, model, tokenizer, max_tokens: int = 512):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.max_tokens = max_tokens

    @classmethod
    def from_pretrained(cls, checkpoint: str, max_tokens: int = 512) -> "HFSpanEncoder":
        return cls(AutoModel.from_pretrained(checkpoint), AutoTokenizer.from_pretrained(checkpoint), max_tokens)

    @torch.no_grad()
    def encode_document(self, text: str) -> EncodedDocument:
        enc = self.tokenizer(text, return_offsets_mapping=True, truncation=True, max_length=self.max_tokens)
        ids = list(enc["input_ids"])
        out = self.model(input_ids=torch.tensor([ids]))
        hidden = out.last_hidden_state[0].double().numpy()
        return EncodedDocument(text, np.asarray(ids), [tuple(o) for o in enc["offset_mapping"]], np.zeros((0,)), hidden)
