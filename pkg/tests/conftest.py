import random
from pathlib import Path

import numpy as np
import pytest

from contextkp.backbone import StubBackbone
from contextkp.candidates import generate_candidates
from contextkp.config import RunConfig
from contextkp.corpus import Document, load_dataset, segment_sentences

DATA = Path(__file__).resolve().parents[1] / "src" / "contextkp" / "data"
SAMPLES = DATA / "samples.jsonl"
EXAMPLE_CONFIG = DATA / "example_config.yaml"

_ADJ = "new large rapid neural stable local global small robust deep".split()
_NOUN = "model network graph signal river market engine protein sensor kernel policy budget harbor crystal".split()
_VERB = "improves changes supports reduces drives shapes limits".split()
_DET = "the a this every".split()


def random_document(rng: random.Random, n_sentences: int | None = None, doc_id: str = "doc") -> Document:
    """Grammatical-looking text built from small word pools, so chunking is predictable."""
    n_sentences = n_sentences or rng.randint(1, 8)
    sentences = []
    for _ in range(n_sentences):
        words = [rng.choice(_DET).capitalize()]
        words += rng.sample(_ADJ, rng.randint(0, 2)) + rng.sample(_NOUN, rng.randint(1, 2))
        words += [rng.choice(_VERB), rng.choice(_DET)]
        words += rng.sample(_ADJ, rng.randint(0, 1)) + rng.sample(_NOUN, rng.randint(1, 3))
        if rng.random() < 0.5:
            words += ["of", rng.choice(_DET)] + rng.sample(_NOUN, 1)
        sentences.append(" ".join(words) + ".")
    text = " ".join(sentences)
    gold = [" ".join(rng.sample(_NOUN, rng.randint(1, 2))) for _ in range(3)]
    return Document(doc_id, text, segment_sentences(text), gold)


def base_config(**changes) -> RunConfig:
    values = dict(kappa=0.1, lam=1.0, alpha=1.0, sam_layer=1)
    values.update(changes)
    return RunConfig(**values)


@pytest.fixture
def samples():
    return load_dataset(SAMPLES)


@pytest.fixture
def config():
    return base_config()


@pytest.fixture(params=["encoder_decoder", "decoder_only"])
def stub(request):
    return StubBackbone(request.param)


def reference_ranking(backbone, doc, template, alpha):
    """Score each distinct form once, unweighted, and rank by that score."""
    first = {}
    for o in generate_candidates(doc):
        first.setdefault(o.stemmed, o)
    enc = backbone.encode_document(doc.text)
    scored = []
    for form, o in first.items():
        t = backbone.render_template(template, o.surface)
        lp = backbone.template_log_probs(enc, t)
        p = float(np.sum(lp[t.start : t.start + t.length]) / t.length**alpha)
        scored.append((-p, o.char_span[0], form))
    return [form for _, _, form in sorted(scored)]


# acceptance criteria report one line each at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (passed, detail)
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
