"""Per-document extraction: candidates, weighted likelihood, attention saliency, ranking."""

from __future__ import annotations

import dataclasses
import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionScore, build_blocks, combine, global_score, local_score, owning_block, select_layer
from .backbone.base import (
    Backbone,
    EncodedDocument,
    TemplateRender,
    align_word_span,
    embed_span,
    encode_document,
    score_with_hook,
)
from .candidates import CandidateOccurrence, Tagger, generate_candidates
from .config import RunConfig
from .corpus import Document, ResultRecord, segment_sentences
from .ranking import ScoreRecord, dedup_and_rank, final_score
from .weighting import (
    GaussianSchedule,
    build_hook,
    build_weights,
    normalized_center,
    select_semantic_neighbors,
    uses_mixture,
)

log = logging.getLogger(__name__)

STEPS = ("candidate_generation", "candidate_aware_weighting", "multi_granular_attention")


@dataclass
class PreparedDocument:
    document: Document
    occurrences: list[CandidateOccurrence]
    encoded: EncodedDocument | None
    token_index: dict[int, list[int]]
    dropped: list[CandidateOccurrence] = field(default_factory=list)

    @property
    def forms(self) -> list[str]:
        """Distinct stemmed forms in order of first occurrence."""
        return list(dict.fromkeys(o.stemmed for o in self.occurrences))

    def canonical_surface(self, form: str) -> str:
        return next(o.surface for o in self.occurrences if o.stemmed == form)

    def center(self, occ: CandidateOccurrence) -> float:
        return normalized_center(self.token_index[occ.occurrence_id], self.encoded.n_tokens)


class Extractor:
    """Scores every candidate occurrence of a document with one backbone.

    ``span_encoder`` supplies the contextual embeddings used to pick semantic
    neighbours; by default the scoring backbone's own document encoding is used.
    """

    def __init__(
        self,
        backbone: Backbone,
        config: RunConfig,
        tagger: Tagger | None = None,
        span_encoder: Backbone | None = None,
    ):
        self.backbone = backbone
        self.config = config
        self.tagger = tagger
        self.span_encoder = span_encoder
        self.timings: dict[str, float] = defaultdict(float)
        self.schedule = GaussianSchedule(config.sigma0, config.kappa)

    @contextmanager
    def _timed(self, step: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[step] += time.perf_counter() - t0

    # -- step 1 --------------------------------------------------------------------

    def prepare(self, document: Document) -> PreparedDocument:
        if not document.sentences and document.text.strip():
            document = dataclasses.replace(document, sentences=segment_sentences(document.text))
        with self._timed("candidate_generation"):
            occurrences = generate_candidates(document, self.tagger)
        if not occurrences:
            return PreparedDocument(document, [], None, {})
        with self._timed("multi_granular_attention"):
            encoded = encode_document(self.backbone, document.text)
        kept, dropped, index = [], [], {}
        for occ in occurrences:
            idx = align_word_span(encoded, occ.char_span)
            if idx:
                kept.append(occ)
                index[occ.occurrence_id] = idx
            else:
                dropped.append(occ)
        if dropped:
            log.warning("document %s: %d truncated occurrence(s) excluded", document.id, len(dropped))
        return PreparedDocument(document, kept, encoded, index, dropped)

    # -- step 2 --------------------------------------------------------------------

    def form_embeddings(self, prep: PreparedDocument) -> dict[str, np.ndarray]:
        """Mean of the span embeddings of every occurrence of each form."""
        if self.span_encoder is None:
            encoded, index = prep.encoded, prep.token_index
        else:
            encoded = encode_document(self.span_encoder, prep.document.text)
            index = {o.occurrence_id: align_word_span(encoded, o.char_span) for o in prep.occurrences}
        vecs: dict[str, list[np.ndarray]] = defaultdict(list)
        for occ in prep.occurrences:
            if index.get(occ.occurrence_id):
                vecs[occ.stemmed].append(embed_span(encoded, index[occ.occurrence_id]))
        dim = encoded.token_embeddings.shape[1]
        return {f: np.mean(vecs[f], axis=0) if vecs[f] else np.zeros(dim) for f in prep.forms}

    def _templates(self, prep: PreparedDocument) -> dict[str, TemplateRender]:
        return {
            f: self.backbone.render_template(self.config.template_text, prep.canonical_surface(f))
            for f in prep.forms
        }

    def generation_scores(self, prep: PreparedDocument, mode: str | None = None) -> dict[int, float]:
        """p_c for every occurrence under one weighting mode."""
        mode = mode or self.config.weighting_mode
        cfg = self.config
        if not prep.occurrences:
            return {}
        with self._timed("candidate_aware_weighting"):
            templates = self._templates(prep)
            if mode == "off":
                per_form = {
                    f: score_with_hook(self.backbone, prep.encoded, t, None, cfg.alpha) for f, t in templates.items()
                }
                return {o.occurrence_id: per_form[o.stemmed] for o in prep.occurrences}

            neighbors: dict[str, list[str]] = {}
            if uses_mixture(mode) and cfg.k_sem > 0:
                emb = self.form_embeddings(prep)
                forms = prep.forms
                neighbors = {f: select_semantic_neighbors(f, forms, cfg.k_sem, emb) for f in forms}
            by_form: dict[str, list[float]] = defaultdict(list)
            for o in prep.occurrences:
                by_form[o.stemmed].append(prep.center(o))

            n = prep.encoded.n_tokens
            scores = {}
            for occ in prep.occurrences:
                mu = prep.center(occ)
                neighbor_mus = [min(by_form[f], key=lambda m: (abs(m - mu), m)) for f in neighbors.get(occ.stemmed, [])]
                weights = build_weights(
                    mu,
                    neighbor_mus,
                    spec=cfg.mixture,
                    schedule=self.schedule,
                    num_layers=self.backbone.handle.num_layers,
                    n=n,
                    mode=mode,
                )
                template = templates[occ.stemmed]
                hook = build_hook(
                    weights,
                    template,
                    mode=mode,
                    k_attn=cfg.k_attn,
                    architecture=self.backbone.handle.architecture,
                )
                scores[occ.occurrence_id] = score_with_hook(self.backbone, prep.encoded, template, hook, cfg.alpha)
            return scores

    # -- step 3 --------------------------------------------------------------------

    def attention_scores(self, prep: PreparedDocument) -> dict[int, AttentionScore]:
        if not prep.occurrences:
            return {}
        layer = self.config.sam_layer
        doc = prep.document
        with self._timed("multi_granular_attention"):
            A = select_layer(prep.encoded.attentions, layer)
            blocks = build_blocks(doc.sentences, self.config.window_w)
            owners = {o.occurrence_id: owning_block(blocks, o.sentence_index) for o in prep.occurrences}
            needed = sorted({b.index for b in owners.values()})
            block_maps = {}
            for bi in needed:
                b = blocks[bi]
                enc = encode_document(self.backbone, doc.text[b.char_span[0] : b.char_span[1]])
                block_maps[bi] = (enc, select_layer(enc.attentions, layer))
            out = {}
            for occ in prep.occurrences:
                g = global_score(A, prep.token_index[occ.occurrence_id])
                block = owners[occ.occurrence_id]
                enc, block_A = block_maps[block.index]
                start = block.char_span[0]
                local_idx = align_word_span(enc, (occ.char_span[0] - start, occ.char_span[1] - start))
                if local_idx:
                    l = local_score(block_A, local_idx, occ.sentence_index, block)
                else:
                    log.warning("document %s: occurrence %d lost in block %d", doc.id, occ.occurrence_id, block.index)
                    l = 0.0
                out[occ.occurrence_id] = AttentionScore(g, l, block.index, layer)
            return out

    # -- step 4 --------------------------------------------------------------------

    def final_records(
        self,
        prep: PreparedDocument,
        p: dict[int, float],
        att: dict[int, AttentionScore] | None,
        attention_mode: str | None = None,
        lam: float | None = None,
    ) -> list[ScoreRecord]:
        attention_mode = attention_mode or self.config.attention_mode
        lam = self.config.lam if lam is None else lam
        records = []
        for occ in prep.occurrences:
            oid = occ.occurrence_id
            a = att.get(oid) if att else None
            g, l = (a.global_score, a.local_score) if a else (0.0, 0.0)
            as_c = combine(g, l, attention_mode) if a else 0.0
            records.append(
                ScoreRecord(
                    occurrence_id=oid,
                    p_c=p[oid],
                    global_score=g,
                    local_score=l,
                    attention=as_c,
                    final=final_score(p[oid], as_c, lam),
                    block_index=a.block_index if a else -1,
                    layer=a.layer if a else -1,
                )
            )
        return records

    def score(self, prep: PreparedDocument) -> list[ScoreRecord]:
        p = self.generation_scores(prep)
        att = self.attention_scores(prep) if self.config.attention_mode != "off" else None
        return self.final_records(prep, p, att)

    def extract(self, document: Document) -> ResultRecord:
        prep = self.prepare(document)
        records = self.score(prep)
        ranked = dedup_and_rank(records, prep.occurrences, self.config.n_top)
        return ResultRecord(document.id, ranked, self.config.hyperparameters())
