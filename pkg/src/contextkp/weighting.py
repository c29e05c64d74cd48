"""Candidate-aware reweighting of the attention the scoring pass sees.

Document positions are normalised to (0, 1): token ``j`` of ``N`` sits at
``(j + 0.5) / N``.  All kernels are unnormalised Gaussians with peak 1, so
every weight vector stays inside [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .backbone.base import DECODER_ONLY, ENCODER_DECODER, AttentionHook, TemplateRender, identity_hook

log = logging.getLogger(__name__)

WEIGHTING_MODES = ("off", "vanilla_only", "vanilla+aligned", "vanilla+mixture", "full")
_USES_MIXTURE = {"vanilla+mixture", "full"}
_USES_ALIGNED = {"vanilla+aligned", "full"}


def uses_mixture(mode: str) -> bool:
    return mode in _USES_MIXTURE


def uses_aligned(mode: str) -> bool:
    return mode in _USES_ALIGNED


@dataclass(frozen=True)
class GaussianSchedule:
    sigma0: float = 0.3
    kappa: float = 0.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")

    def sigma(self, layer: int) -> float:
        return self.sigma0 + self.kappa * layer


@dataclass(frozen=True)
class MixtureSpec:
    pi_c: float = 0.7
    pi_neighbors: tuple[float, ...] = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.pi_c < 0 or any(p < 0 for p in self.pi_neighbors):
            raise ValueError("mixture coefficients must be non-negative")
        total = math.fsum((self.pi_c, *self.pi_neighbors))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture coefficients sum to {total}, expected 1")

    @classmethod
    def uniform(cls, pi_c: float, pi_neighbor: float, k_sem: int) -> "MixtureSpec":
        return cls(pi_c, (pi_neighbor,) * k_sem)

    @property
    def k_sem(self) -> int:
        return len(self.pi_neighbors)

    def total(self) -> float:
        return math.fsum((self.pi_c, *self.pi_neighbors))

    def restrict(self, available: int) -> "MixtureSpec":
        """Keep ``pi_c`` and spread the neighbour mass over ``available`` neighbours."""
        if available >= self.k_sem:
            return self
        if available == 0:
            return MixtureSpec(1.0, ())
        rest = 1.0 - self.pi_c
        return MixtureSpec(self.pi_c, (rest / available,) * available)


def token_positions(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def normalized_center(indices, n: int) -> float:
    """Normalised midpoint of a token span."""
    indices = list(indices)
    return ((min(indices) + max(indices)) / 2 + 0.5) / n


def vanilla_weight(mu: float, sigma: float, n: int) -> np.ndarray:
    """Gaussian kernel with peak 1 centred on ``mu``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n < 1:
        raise ValueError("need at least one document token")
    x = token_positions(n)
    return np.exp(-((x - mu) ** 2) / (2.0 * sigma**2))


def mixture_weight(mu: float, neighbor_mus, spec: MixtureSpec, sigma: float, n: int) -> np.ndarray:
    neighbor_mus = list(neighbor_mus)
    spec = spec.restrict(len(neighbor_mus))
    w = spec.pi_c * vanilla_weight(mu, sigma, n)
    for pi, mu_j in zip(spec.pi_neighbors, neighbor_mus):
        w = w + pi * vanilla_weight(mu_j, sigma, n)
    return np.clip(w, 0.0, 1.0)


def select_semantic_neighbors(
    form: str,
    forms: list[str],
    k_sem: int,
    embeddings: dict[str, np.ndarray],
) -> list[str]:
    """The ``k_sem`` forms most cosine-similar to ``form``.

    ``forms`` must be in order of first occurrence; ties go to the earlier
    form.  Forms with zero-norm embeddings are skipped.
    """
    if k_sem <= 0:
        return []
    anchor = embeddings[form]
    anchor_norm = np.linalg.norm(anchor)
    if anchor_norm == 0:
        log.warning("zero-norm embedding for %r; no semantic neighbours", form)
        return []
    scored = []
    for order, other in enumerate(forms):
        if other == form:
            continue
        vec = embeddings[other]
        norm = np.linalg.norm(vec)
        if norm == 0:
            log.warning("zero-norm embedding for %r; excluded from neighbours", other)
            continue
        scored.append((-float(anchor @ vec / (anchor_norm * norm)), order, other))
    scored.sort()
    return [other for _, _, other in scored[:k_sem]]


def alignment_scores(scores: np.ndarray, start: int, length: int, architecture: str, n_doc: int | None = None) -> np.ndarray:
    """Sum the candidate rows of a pre-softmax score matrix over document columns."""
    if architecture == ENCODER_DECODER:
        rows = range(start, start + length)
        n = scores.shape[1]
    elif architecture == DECODER_ONLY:
        if n_doc is None:
            raise ValueError("decoder-only alignment needs the document length")
        rows = range(n_doc + start, n_doc + start + length)
        n = n_doc
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    if length < 1 or rows.start < 0 or rows.stop > scores.shape[0]:
        raise IndexError(f"candidate rows {rows.start}..{rows.stop - 1} out of bounds for {scores.shape[0]} rows")
    return scores[rows.start : rows.stop, :n].sum(axis=0)


def top_k_attn(v: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries (ties to the lower index), ascending."""
    if k <= 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(-np.asarray(v), kind="stable")
    return np.sort(order[:k])


def final_weight(w_mixture: np.ndarray, aligned) -> np.ndarray:
    w = np.array(w_mixture, dtype=float)
    w[np.asarray(aligned, dtype=int)] = 1.0
    return w


def expand_weight(w_final: np.ndarray, architecture: str, m: int, n: int) -> np.ndarray:
    """Lift a per-document-token weight vector to the hooked score matrix shape."""
    w_final = np.asarray(w_final, dtype=float)
    if w_final.shape != (n,):
        raise ValueError(f"weight vector has shape {w_final.shape}, expected ({n},)")
    if architecture == ENCODER_DECODER:
        return np.broadcast_to(w_final, (m, n)).copy()
    if architecture == DECODER_ONLY:
        W = np.ones((n + m, n + m))
        W[n:, :n] = w_final
        return W
    raise ValueError(f"unknown architecture {architecture!r}")


def adjust_logits(scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Scale non-negative logits by ``W`` and negative logits by ``1 - W``."""
    scores = np.asarray(scores)
    weights = np.asarray(weights)
    if scores.shape != weights.shape:
        raise ValueError(f"score shape {scores.shape} != weight shape {weights.shape}")
    if weights.size and (weights.min() < 0 or weights.max() > 1):
        raise ValueError("weights must lie in [0, 1]")
    return np.where(scores >= 0, scores * weights, scores * (1.0 - weights))


@dataclass
class WeightArtifacts:
    """Per-layer weight vectors for one occurrence.

    ``aligned`` and ``final`` are filled per (layer, head) by a tracing hook.
    """

    vanilla: np.ndarray  # (layers, N)
    mixture: np.ndarray  # (layers, N)
    aligned: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)

    @property
    def n_doc(self) -> int:
        return self.vanilla.shape[1]


def build_weights(
    mu: float,
    neighbor_mus,
    *,
    spec: MixtureSpec,
    schedule: GaussianSchedule,
    num_layers: int,
    n: int,
    mode: str = "full",
) -> WeightArtifacts:
    if mode not in WEIGHTING_MODES:
        raise ValueError(f"unknown weighting mode {mode!r}; valid: {', '.join(WEIGHTING_MODES)}")
    vanilla = np.stack([vanilla_weight(mu, schedule.sigma(l), n) for l in range(num_layers)])
    if uses_mixture(mode):
        mixture = np.stack([mixture_weight(mu, neighbor_mus, spec, schedule.sigma(l), n) for l in range(num_layers)])
    else:
        mixture = vanilla
    return WeightArtifacts(vanilla, mixture)


def build_hook(
    weights: WeightArtifacts,
    template: TemplateRender,
    *,
    mode: str,
    k_attn: int,
    architecture: str,
    trace: bool = False,
) -> AttentionHook:
    """Attention hook that reweights the scoring pass for one occurrence.

    The aligned token set is recomputed from the scores each (layer, head)
    sees, so the hook needs no forward pass of its own.
    """
    if mode == "off":
        return identity_hook
    if mode not in WEIGHTING_MODES:
        raise ValueError(f"unknown weighting mode {mode!r}")
    n = weights.n_doc
    m = template.n_tokens
    aligned_on = uses_aligned(mode)

    def hook(layer: int, head: int, scores: np.ndarray) -> np.ndarray:
        if not 0 <= layer < len(weights.mixture):
            raise KeyError(f"no weights for layer {layer}")
        w = weights.mixture[layer]
        if aligned_on:
            v = alignment_scores(scores, template.start, template.length, architecture, n)
            aligned = top_k_attn(v, k_attn)
            w = final_weight(w, aligned)
            if trace:
                weights.aligned[layer, head] = aligned
        if trace:
            weights.final[layer, head] = w
        return adjust_logits(scores, expand_weight(w, architecture, m, n))

    return hook
