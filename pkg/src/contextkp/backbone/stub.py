"""Deterministic numpy transformer used as a test oracle and for timing probes.

Weights come from a seeded generator, so two instances with the same seed are
bit-identical.  With ``uniform_output=True`` the output layer is zero and every
next-token distribution is uniform over the vocabulary, which makes template
log-likelihoods available in closed form.
"""

from __future__ import annotations

import re
import zlib

import numpy as np

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

# "_" is not a token character, so "new_york" becomes two sub-word tokens
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]")
BOS = 0


def _layer_norm(x):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-5)


def _softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class StubBackbone:
    def __init__(
        self,
        architecture: str = ENCODER_DECODER,
        *,
        num_layers: int = 2,
        num_heads: int = 2,
        d_model: int = 16,
        vocab_size: int = 97,
        max_tokens: int = 512,
        seed: int = 0,
        uniform_output: bool = False,
        logit_scale: float = 4.0,
    ):
        if d_model % num_heads:
            raise ValueError("d_model must be divisible by num_heads")
        self.handle = BackboneHandle(architecture, num_layers, num_heads, d_model // num_heads, max_tokens)
        self.vocab_size = vocab_size
        self.d_model = d_model
        self.uniform_output = uniform_output
        self.logit_scale = logit_scale
        rng = np.random.default_rng(seed)
        self.embedding = rng.normal(0.0, 1.0, (vocab_size, d_model))

        def attn():
            return {k: rng.normal(0.0, d_model**-0.5, (d_model, d_model)) for k in ("q", "k", "v", "o")}

        def ff():
            return (rng.normal(0.0, d_model**-0.5, (d_model, 2 * d_model)), rng.normal(0.0, (2 * d_model) ** -0.5, (2 * d_model, d_model)))

        if architecture == ENCODER_DECODER:
            self.encoder = [{"self": attn(), "ff": ff()} for _ in range(num_layers)]
            self.decoder = [{"self": attn(), "cross": attn(), "ff": ff()} for _ in range(num_layers)]
        else:
            self.decoder = [{"self": attn(), "ff": ff()} for _ in range(num_layers)]

    # -- tokenizer -----------------------------------------------------------------

    def tokenize(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        ids, offsets = [], []
        for m in _TOKEN_RE.finditer(text):
            ids.append(zlib.crc32(m.group().lower().encode("utf-8")) % (self.vocab_size - 1) + 1)
            offsets.append((m.start(), m.end()))
        return ids, offsets

    # -- transformer pieces --------------------------------------------------------

    def _embed(self, ids) -> np.ndarray:
        n = len(ids)
        pos = np.arange(n)[:, None]
        dim = np.arange(self.d_model)[None, :]
        angle = pos / np.power(10000.0, (2 * (dim // 2)) / self.d_model)
        pe = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))
        return self.embedding[np.asarray(ids, dtype=int)] + 0.5 * pe

    def _attend(self, w, xq, xkv, *, causal: bool, layer: int, hook: AttentionHook | None):
        H, dh = self.handle.num_heads, self.handle.key_dim
        q = (xq @ w["q"]).reshape(len(xq), H, dh).transpose(1, 0, 2)
        k = (xkv @ w["k"]).reshape(len(xkv), H, dh).transpose(1, 0, 2)
        v = (xkv @ w["v"]).reshape(len(xkv), H, dh).transpose(1, 0, 2)
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
        if hook is not None:
            scores = np.stack([apply_hook(hook, layer, h, scores[h]) for h in range(H)])
        if causal:
            mask = np.triu(np.ones(scores.shape[-2:], dtype=bool), k=1)
            scores = np.where(mask, -np.inf, scores)
        probs = _softmax(scores)
        out = (probs @ v).transpose(1, 0, 2).reshape(len(xq), self.d_model) @ w["o"]
        return out, probs

    @staticmethod
    def _ff(params, x):
        w1, w2 = params
        return np.tanh(x @ w1) @ w2

    def _logits(self, h):
        if self.uniform_output:
            return np.zeros((len(h), self.vocab_size))
        return self.logit_scale * (h @ self.embedding.T) / np.sqrt(self.d_model)

    def _causal_stack(self, x, hook=None, keep=None):
        for l, layer in enumerate(self.decoder):
            a, probs = self._attend(layer["self"], x, x, causal=True, layer=l, hook=hook)
            if keep is not None:
                keep.append(probs)
            x = _layer_norm(x + a)
            x = _layer_norm(x + self._ff(layer["ff"], x))
        return x

    # -- backbone interface --------------------------------------------------------

    def encode_document(self, text: str) -> EncodedDocument:
        ids, offsets = self.tokenize(text)
        truncated = len(ids) > self.handle.max_tokens
        ids, offsets = ids[: self.handle.max_tokens], offsets[: self.handle.max_tokens]
        if not ids:
            return EncodedDocument(text, np.zeros(0, dtype=int), [], np.zeros((self.handle.num_layers, self.handle.num_heads, 0, 0)), np.zeros((0, self.d_model)))
        x = self._embed(ids)
        maps = []
        if self.handle.architecture == ENCODER_DECODER:
            for layer in self.encoder:
                a, probs = self._attend(layer["self"], x, x, causal=False, layer=0, hook=None)
                maps.append(probs)
                x = _layer_norm(x + a)
                x = _layer_norm(x + self._ff(layer["ff"], x))
        else:
            x = self._causal_stack(x, keep=maps)
        return EncodedDocument(
            text=text,
            token_ids=np.asarray(ids),
            offsets=offsets,
            attentions=np.stack(maps),
            token_embeddings=x,
            truncated=truncated,
            state=x,
        )

    def render_template(self, template: str, candidate: str) -> TemplateRender:
        rendered = template.replace("{candidate}", candidate)
        pos = template.index("{candidate}")
        ids, offsets = self.tokenize(rendered)
        start, length = locate_candidate(offsets, pos, pos + len(candidate))
        return TemplateRender(rendered, tuple(ids), start, length)

    def template_log_probs(
        self, encoded: EncodedDocument, template: TemplateRender, hook: AttentionHook | None = None
    ) -> np.ndarray:
        targets = np.asarray(template.token_ids)
        if self.handle.architecture == ENCODER_DECODER:
            memory = encoded.state
            y = self._embed([BOS, *template.token_ids[:-1]])
            for l, layer in enumerate(self.decoder):
                a, _ = self._attend(layer["self"], y, y, causal=True, layer=l, hook=None)
                y = _layer_norm(y + a)
                c, _ = self._attend(layer["cross"], y, memory, causal=False, layer=l, hook=hook)
                y = _layer_norm(y + c)
                y = _layer_norm(y + self._ff(layer["ff"], y))
            logp = _log_softmax(self._logits(y))
            return logp[np.arange(len(targets)), targets]
        n = encoded.n_tokens
        x = self._causal_stack(self._embed([*encoded.token_ids, *template.token_ids]), hook=hook)
        logp = _log_softmax(self._logits(x[n - 1 : -1]))
        return logp[np.arange(len(targets)), targets]

    def attention_probs(self, encoded: EncodedDocument, template: TemplateRender, hook: AttentionHook | None = None):
        """Post-softmax attention of every hooked layer during scoring (for inspection)."""
        if self.handle.architecture != DECODER_ONLY:
            raise NotImplementedError("only the decoder-only stub exposes scoring-pass attention")
        maps: list[np.ndarray] = []
        self._causal_stack(self._embed([*encoded.token_ids, *template.token_ids]), hook=hook, keep=maps)
        return maps
