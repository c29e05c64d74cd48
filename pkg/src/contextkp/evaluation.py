"""F1@k, similarity-bin recall, topic drift and ablation runs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
import zlib
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import DatasetError, Document, ResultRecord, normalize_phrase
from .lexicon import LEXICON
from .porter import stem
from .ranking import dedup_and_rank

log = logging.getLogger(__name__)

DEFAULT_KS = (5, 10, 15)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    empty_gold: bool = False


def f1_at_k(predicted: Sequence[str], gold: Iterable[str], k: int) -> PRF:
    """Precision, recall and F1 of the top ``k`` stemmed predictions.

    Precision divides by ``min(k, len(predicted))`` so short lists are not
    penalised for candidates they never had.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    gold = set(gold)
    if not gold:
        return PRF(0.0, 0.0, 0.0, empty_gold=True)
    top = list(predicted)[:k]
    if not top:
        return PRF(0.0, 0.0, 0.0)
    matches = len(set(top) & gold)
    p = matches / len(top)
    r = matches / len(gold)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f)


@dataclass
class MetricReport:
    dataset: str
    mode: str
    scores: dict[int, PRF]
    per_document: dict[str, dict[int, PRF]] = field(default_factory=dict)
    empty_gold: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        return [(self.dataset, self.mode, k, s.precision, s.recall, s.f1) for k, s in sorted(self.scores.items())]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["dataset", "mode", "k", "P", "R", "F1"])
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "mode": self.mode,
            "scores": {str(k): asdict(s) for k, s in sorted(self.scores.items())},
            "per_document": {
                doc: {str(k): asdict(s) for k, s in sorted(v.items())} for doc, v in self.per_document.items()
            },
            "empty_gold": self.empty_gold,
            "metadata": self.metadata,
        }


def evaluate(
    results: Sequence[ResultRecord],
    documents: Sequence[Document],
    ks: Sequence[int] = DEFAULT_KS,
    *,
    dataset: str = "dataset",
    mode: str = "full",
    average: str = "macro",
) -> MetricReport:
    """Score ranked results against the gold keyphrases of ``documents``.

    ``average="macro"`` averages per-document P/R/F1; ``"micro"`` pools the
    match counts first.  Documents with no gold phrases are flagged and left
    out of both averages.
    """
    if average not in ("macro", "micro"):
        raise ValueError("average must be 'macro' or 'micro'")
    by_id = {d.id: d for d in documents}
    per_doc: dict[str, dict[int, PRF]] = {}
    empty = []
    counts = {k: [0, 0, 0] for k in ks}  # matches, predicted, gold
    for rec in results:
        doc = by_id.get(rec.document_id)
        if doc is None:
            raise DatasetError(f"results reference unknown document id {rec.document_id!r}")
        gold = set(doc.gold_stemmed)
        predicted = [c.stemmed for c in rec.ranked]
        if not gold:
            empty.append(doc.id)
            continue
        per_doc[doc.id] = {k: f1_at_k(predicted, gold, k) for k in ks}
        for k in ks:
            top = predicted[:k]
            counts[k][0] += len(set(top) & gold)
            counts[k][1] += len(top)
            counts[k][2] += len(gold)
    if empty:
        log.warning("%d document(s) without gold keyphrases skipped: %s", len(empty), ", ".join(empty))
    scores = {}
    for k in ks:
        if average == "macro":
            vals = [v[k] for v in per_doc.values()]
            if vals:
                p = float(np.mean([v.precision for v in vals]))
                r = float(np.mean([v.recall for v in vals]))
                f = float(np.mean([v.f1 for v in vals]))
            else:
                p = r = f = 0.0
        else:
            m, npred, ngold = counts[k]
            p = m / npred if npred else 0.0
            r = m / ngold if ngold else 0.0
            f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        scores[k] = PRF(p, r, f)
    return MetricReport(dataset, mode, scores, per_doc, empty, {"average": average, "documents": len(per_doc)})


# -- embedding providers -----------------------------------------------------------


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


_FUNCTION_TAGS = {"DT", "PRP", "PRP$", "IN", "TO", "CC", "MD", "WDT", "WP", "WRB", "EX", "VBZ", "VBP", "VBD"}
_STOPWORDS = frozenset(w for w, t in LEXICON.items() if t in _FUNCTION_TAGS)


class HashingEmbedder:
    """Bag of stemmed content words hashed into a fixed number of buckets."""

    def __init__(self, dim: int = 512):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for word in re.findall(r"[^\W_]+", text.lower()):
            if word not in _STOPWORDS:
                vec[zlib.crc32(stem(word).encode("utf-8")) % self.dim] += 1.0
        return vec


class BackboneEmbedder:
    """Mean-pooled contextual token embeddings from a backbone's document pass."""

    def __init__(self, backbone):
        self.backbone = backbone

    def embed(self, text: str) -> np.ndarray:
        enc = self.backbone.encode_document(text)
        rows = [i for i, (s, e) in enumerate(enc.offsets) if e > s]
        if not rows:
            return np.zeros(enc.token_embeddings.shape[1])
        return enc.token_embeddings[rows].mean(axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return None
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


# -- similarity bins ---------------------------------------------------------------


@dataclass(frozen=True)
class BinRow:
    bin_lo: float
    bin_hi: float
    total: int
    retrieved: int

    @property
    def recall(self) -> float | None:
        return self.retrieved / self.total if self.total else None


@dataclass
class BinReport:
    rows: list[BinRow]
    excluded: int = 0
    improvement: list[float | None] | None = None

    def recalls(self) -> list[float | None]:
        return [r.recall for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["bin_lo", "bin_hi", "total", "retrieved", "recall"]
        if self.improvement is not None:
            head.append("relative_improvement")
        w.writerow(head)
        for i, r in enumerate(self.rows):
            row = [r.bin_lo, r.bin_hi, r.total, r.retrieved, "" if r.recall is None else r.recall]
            if self.improvement is not None:
                imp = self.improvement[i]
                row.append("" if imp is None else imp)
            w.writerow(row)
        return buf.getvalue()


def _bin_edges(values: Sequence[float], n_bins: int) -> np.ndarray:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5 / n_bins, hi + 0.5 / n_bins
    return np.linspace(lo, hi, n_bins + 1)


def similarity_bin_recall(
    documents: Sequence[Document],
    rankings: dict[str, Sequence[str]],
    embedder: Embedder,
    k: int = 15,
    n_bins: int = 5,
    edges: Sequence[float] | None = None,
    baseline: dict[str, Sequence[str]] | None = None,
) -> BinReport:
    """Recall of gold phrases in the top ``k``, bucketed by document-phrase cosine.

    ``rankings`` maps a document id to its ranked stemmed forms.  Without
    explicit ``edges`` the observed cosine range is cut into ``n_bins`` equal
    bins.  With a ``baseline`` ranking the report also carries the relative
    recall change per bin.
    """
    items = []  # (cosine, retrieved, retrieved_by_baseline)
    excluded = 0
    for doc in documents:
        if doc.id not in rankings:
            raise DatasetError(f"no ranking for document {doc.id!r}")
        doc_vec = embedder.embed(doc.text)
        top = set(list(rankings[doc.id])[:k])
        base_top = set(list(baseline[doc.id])[:k]) if baseline else set()
        for phrase in doc.gold_keyphrases:
            sim = cosine(doc_vec, embedder.embed(phrase))
            if sim is None:
                excluded += 1
                continue
            form = normalize_phrase(phrase)
            items.append((sim, form in top, form in base_top))
    if excluded:
        log.warning("%d gold phrase(s) with zero-norm embeddings excluded from bins", excluded)
    if not items:
        return BinReport([], excluded, [] if baseline else None)
    edges = np.asarray(edges if edges is not None else _bin_edges([s for s, _, _ in items], n_bins), dtype=float)
    nb = len(edges) - 1
    total, hit, base_hit = [0] * nb, [0] * nb, [0] * nb
    for sim, got, base_got in items:
        b = int(np.clip(np.searchsorted(edges, sim, side="right") - 1, 0, nb - 1))
        total[b] += 1
        hit[b] += got
        base_hit[b] += base_got
    rows = [BinRow(float(edges[i]), float(edges[i + 1]), total[i], hit[i]) for i in range(nb)]
    improvement = None
    if baseline is not None:
        improvement = []
        for i in range(nb):
            if total[i] == 0 or base_hit[i] == 0:
                improvement.append(None)
            else:
                improvement.append((hit[i] - base_hit[i]) / base_hit[i])
    return BinReport(rows, excluded, improvement)


# -- topic drift -------------------------------------------------------------------


@dataclass(frozen=True)
class DriftResult:
    value: float
    units: int
    undefined: bool = False


def topic_drift(document: Document, embedder: Embedder, unit_size: int = 3) -> DriftResult:
    """One minus the mean cosine over all pairs of sentence units.

    A trailing partial unit is kept.  With fewer than two units the drift is
    undefined and reported as 0 with ``undefined`` set.
    """
    spans = document.sentences
    units = [spans[i : i + unit_size] for i in range(0, len(spans), unit_size)]
    if len(units) < 2:
        return DriftResult(0.0, len(units), undefined=True)
    vecs = [embedder.embed(document.text[u[0][0] : u[-1][1]]) for u in units]
    sims = [cosine(a, b) for a, b in combinations(vecs, 2)]
    sims = [0.0 if s is None else s for s in sims]
    return DriftResult(float(min(2.0, max(0.0, 1.0 - math.fsum(sims) / len(sims)))), len(units))


def corpus_drift(documents: Sequence[Document], embedder: Embedder, unit_size: int = 3) -> tuple[float, int]:
    """Mean drift over documents where it is defined, and the number of those."""
    vals = [r.value for r in (topic_drift(d, embedder, unit_size) for d in documents) if not r.undefined]
    return (float(np.mean(vals)) if vals else 0.0), len(vals)


# -- ablations ---------------------------------------------------------------------

# mode -> (weighting_mode, attention_mode); lambda is forced to 0 when attention is off
ABLATION_MODES = {
    "full": ("full", "full"),
    "candidate-aware-weighting-only": ("full", "off"),
    "vanilla+aligned": ("vanilla+aligned", "off"),
    "vanilla+mixture": ("vanilla+mixture", "off"),
    "vanilla-only": ("vanilla_only", "off"),
    "multi-granular-only": ("off", "full"),
    "global-only": ("off", "global"),
    "local-only": ("off", "local"),
    "baseline": ("off", "off"),
}


def check_modes(modes: Iterable[str]) -> list[str]:
    modes = list(modes)
    bad = [m for m in modes if m not in ABLATION_MODES]
    if bad:
        raise ValueError(f"unknown ablation mode(s) {', '.join(bad)}; valid: {', '.join(ABLATION_MODES)}")
    return modes


def ablation_records(extractor, documents: Sequence[Document], modes: Sequence[str]) -> dict[str, list[ResultRecord]]:
    """Ranked results per ablation mode, sharing candidates and cached scores."""
    modes = check_modes(modes)
    out: dict[str, list[ResultRecord]] = {m: [] for m in modes}
    cfg = extractor.config
    for doc in documents:
        prep = extractor.prepare(doc)
        p_cache: dict[str, dict] = {}
        att = None
        for mode in modes:
            wmode, amode = ABLATION_MODES[mode]
            if wmode not in p_cache:
                p_cache[wmode] = extractor.generation_scores(prep, wmode)
            if amode != "off" and att is None:
                att = extractor.attention_scores(prep)
            lam = cfg.lam if amode != "off" else 0.0
            records = extractor.final_records(prep, p_cache[wmode], att if amode != "off" else None, amode, lam)
            ranked = dedup_and_rank(records, prep.occurrences, cfg.n_top)
            hyper = {**cfg.hyperparameters(), "weighting_mode": wmode, "attention_mode": amode, "lambda": lam}
            out[mode].append(ResultRecord(doc.id, ranked, hyper))
    return out


def run_ablation(
    extractor,
    documents: Sequence[Document],
    modes: Sequence[str] = tuple(ABLATION_MODES),
    ks: Sequence[int] = DEFAULT_KS,
    dataset: str = "dataset",
) -> dict[str, MetricReport]:
    results = ablation_records(extractor, documents, modes)
    return {m: evaluate(recs, documents, ks, dataset=dataset, mode=m) for m, recs in results.items()}


def layer_sweep(
    extractor,
    documents: Sequence[Document],
    layers: Sequence[int],
    ks: Sequence[int] = DEFAULT_KS,
    dataset: str = "dataset",
) -> dict[int, MetricReport]:
    """F1 per self-attention layer; generation scores are computed once per document."""
    cfg = extractor.config
    results: dict[int, list[ResultRecord]] = {l: [] for l in layers}
    for doc in documents:
        prep = extractor.prepare(doc)
        p = extractor.generation_scores(prep)
        for layer in layers:
            extractor.config = cfg.replace(sam_layer=layer)
            try:
                att = extractor.attention_scores(prep) if cfg.attention_mode != "off" else None
                records = extractor.final_records(prep, p, att)
            finally:
                extractor.config = cfg
            ranked = dedup_and_rank(records, prep.occurrences, cfg.n_top)
            results[layer].append(ResultRecord(doc.id, ranked, {**cfg.hyperparameters(), "sam_layer": layer}))
    return {l: evaluate(r, documents, ks, dataset=dataset, mode=f"layer-{l}") for l, r in results.items()}


def write_reports(reports: Iterable[MetricReport], csv_path=None, json_path=None) -> None:
    reports = list(reports)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            for i, rep in enumerate(reports):
                fh.write(rep.to_csv(header=i == 0))
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump([r.to_json() for r in reports], fh, indent=2, ensure_ascii=False)
