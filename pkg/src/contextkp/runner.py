"""Corpus-level runs: worker pool with per-document fault isolation, and timing probes."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backbone import make_backbone, make_span_encoder
from .config import RunConfig
from .corpus import Document, ResultRecord
from .pipeline import STEPS, Extractor

log = logging.getLogger(__name__)


def build_extractor(config: RunConfig) -> Extractor:
    backbone = make_backbone(config.backbone, config.architecture, seed=config.stub_seed, max_tokens=config.max_tokens)
    return Extractor(backbone, config, span_encoder=make_span_encoder(config.embedding_model, config.max_tokens))


@dataclass
class RunOutcome:
    records: list[ResultRecord]
    errors: list[dict]
    timings: dict[str, float]


def _extract_one(extractor: Extractor, doc: Document):
    try:
        return extractor.extract(doc), None
    except Exception as exc:  # any module error aborts only this document
        log.error("document %s failed: %s: %s", doc.id, type(exc).__name__, exc)
        return None, {"document_id": doc.id, "error": type(exc).__name__, "message": str(exc)}


_worker_extractor: Extractor | None = None


def _init_worker(config: RunConfig) -> None:
    global _worker_extractor
    _worker_extractor = build_extractor(config)


def _worker_task(doc: Document):
    before = dict(_worker_extractor.timings)
    result = _extract_one(_worker_extractor, doc)
    delta = {s: _worker_extractor.timings.get(s, 0.0) - before.get(s, 0.0) for s in STEPS}
    return result, delta


def run_extraction(
    config: RunConfig,
    documents: Sequence[Document],
    extractor: Extractor | None = None,
    workers: int | None = None,
) -> RunOutcome:
    """Extract every document; output order follows ``documents``."""
    workers = workers or config.workers
    records, errors = [], []
    timings = dict.fromkeys(STEPS, 0.0)
    if workers <= 1 or len(documents) <= 1:
        extractor = extractor or build_extractor(config)
        before = dict(extractor.timings)
        for i, doc in enumerate(documents, 1):
            rec, err = _extract_one(extractor, doc)
            if rec is not None:
                records.append(rec)
            else:
                errors.append(err)
            log.info("processed %d/%d (%s)", i, len(documents), doc.id)
        for step in STEPS:
            timings[step] = extractor.timings.get(step, 0.0) - before.get(step, 0.0)
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config,)) as pool:
            # map() yields in submission order, so merging is deterministic
            for i, ((rec, err), delta) in enumerate(pool.map(_worker_task, documents), 1):
                if rec is not None:
                    records.append(rec)
                else:
                    errors.append(err)
                for step in STEPS:
                    timings[step] += delta[step]
                log.info("processed %d/%d (%s)", i, len(documents), documents[i - 1].id)
    for step in STEPS:
        log.info("step %s: %.3fs", step, timings[step])
    return RunOutcome(records, errors, timings)


@dataclass(frozen=True)
class ScalingRow:
    documents: int
    seconds: float


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    slope: float | None = None
    intercept: float | None = None
    r_squared: float | None = None

    def to_text(self) -> str:
        lines = ["documents\tseconds"] + [f"{r.documents}\t{r.seconds:.4f}" for r in self.rows]
        if self.r_squared is not None:
            lines.append(f"fit: seconds = {self.slope:.6f} * documents + {self.intercept:.6f}  (R^2 = {self.r_squared:.4f})")
        return "\n".join(lines)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line and its coefficient of determination."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def scaling_probe(config: RunConfig, documents: Sequence[Document], sizes: Sequence[int], repeats: int = 1) -> ScalingReport:
    """Wall time of a sequential extraction run for each corpus size.

    Corpora of the requested sizes are built by cycling ``documents``.  The
    backbone is built once up front so only per-document work is timed, and
    the fastest of ``repeats`` runs is kept.
    """
    if not documents:
        raise ValueError("scaling probe needs at least one document")
    extractor = build_extractor(config)
    for doc in documents[: max(sizes, default=0)]:
        extractor.extract(doc)  # warm caches so the first size is not penalised
    rows = []
    for size in sizes:
        corpus = [dataclasses.replace(documents[i % len(documents)], id=f"probe-{i}") for i in range(size)]
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            for doc in corpus:
                extractor.extract(doc)
            best = min(best, time.perf_counter() - t0)
        rows.append(ScalingRow(size, best))
        log.info("scaling probe: %d documents in %.3fs", size, best)
    if len({r.documents for r in rows}) < 2:
        return ScalingReport(rows)
    return ScalingReport(rows, *linear_fit([r.documents for r in rows], [r.seconds for r in rows]))
