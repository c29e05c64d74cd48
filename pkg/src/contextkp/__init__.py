"""Occurrence-level unsupervised keyphrase extraction with a pretrained language model."""

from .backbone import StubBackbone, make_backbone
from .candidates import CandidateOccurrence, generate_candidates
from .config import ConfigError, RunConfig, load_config, save_config
from .corpus import Document, RankedCandidate, ResultRecord, load_dataset, read_results, write_results
from .evaluation import ABLATION_MODES, f1_at_k, run_ablation, topic_drift
from .pipeline import Extractor
from .runner import build_extractor, run_extraction, scaling_probe

__version__ = "0.1.0"

__all__ = [
    "ABLATION_MODES",
    "CandidateOccurrence",
    "ConfigError",
    "Document",
    "Extractor",
    "RankedCandidate",
    "ResultRecord",
    "RunConfig",
    "StubBackbone",
    "build_extractor",
    "f1_at_k",
    "generate_candidates",
    "load_config",
    "load_dataset",
    "make_backbone",
    "read_results",
    "run_ablation",
    "run_extraction",
    "save_config",
    "scaling_probe",
    "topic_drift",
    "write_results",
]
