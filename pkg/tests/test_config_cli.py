import json
import subprocess
import sys

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from contextkp.cli import main
from contextkp.config import REQUIRED, ConfigError, RunConfig, config_keys, from_mapping, load_config, save_config
from contextkp.runner import linear_fit

from conftest import EXAMPLE_CONFIG, SAMPLES, base_config


def test_example_config_lists_every_key():
    data = yaml.safe_load(EXAMPLE_CONFIG.read_text())
    assert set(data) == set(config_keys())
    cfg = load_config(EXAMPLE_CONFIG)
    assert cfg == RunConfig(**{("lam" if k == "lambda" else k): v for k, v in data.items()})


@given(
    st.floats(0, 5, allow_nan=False),
    st.floats(0, 10, allow_nan=False),
    st.floats(0, 2, allow_nan=False),
    st.integers(0, 11),
    st.sampled_from(["off", "vanilla_only", "vanilla+aligned", "vanilla+mixture", "full"]),
    st.sampled_from(["full", "global", "local", "off"]),
)
@settings(max_examples=50, deadline=None)
def test_config_round_trips(tmp_path_factory, kappa, lam, alpha, layer, wmode, amode):
    cfg = base_config(kappa=kappa, lam=lam, alpha=alpha, sam_layer=layer, weighting_mode=wmode, attention_mode=amode)
    path = tmp_path_factory.mktemp("cfg") / "c.yaml"
    save_config(cfg, path)
    assert load_config(path) == cfg


@pytest.mark.parametrize("key", REQUIRED)
def test_missing_required_key_is_named(key):
    data = {"kappa": 0.1, "lambda": 1.0, "alpha": 1.0, "sam_layer": 1}
    del data[key]
    with pytest.raises(ConfigError, match=key):
        from_mapping(data)


@pytest.mark.parametrize(
    "changes,msg",
    [
        ({"bogus": 1}, "unknown config keys: bogus"),
        ({"sigma0": 0}, "sigma0"),
        ({"pi_c": 0.5}, "pi_c"),
        ({"weighting_mode": "max"}, "weighting_mode"),
        ({"template_text": "no slot"}, "template_text"),
        ({"k_sem": "three"}, "k_sem"),
        ({"lambda": -1}, "lambda"),
    ],
)
def test_invalid_configs(changes, msg):
    data = {"kappa": 0.1, "lambda": 1.0, "alpha": 1.0, "sam_layer": 1, **changes}
    with pytest.raises(ConfigError, match=msg):
        from_mapping(data)


def test_defaults_are_logged(caplog):
    with caplog.at_level("INFO"):
        from_mapping({"kappa": 0.1, "lambda": 1.0, "alpha": 1.0, "sam_layer": 1})
    assert "built-in defaults" in caplog.text and "sigma0" in caplog.text


def run_cli(*args):
    return main([str(a) for a in args])


def test_extract_is_byte_identical_across_runs(tmp_path):
    for name in ("a.jsonl", "b.jsonl"):
        assert run_cli("extract", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--output", tmp_path / name) == 0
    a, b = (tmp_path / "a.jsonl").read_bytes(), (tmp_path / "b.jsonl").read_bytes()
    assert a == b
    lines = a.decode().splitlines()
    assert [json.loads(l)["document_id"] for l in lines] == ["news-harbor", "howto-sourdough", "abstract-graphs"]
    assert all(len(json.loads(l)["ranked"]) == 15 for l in lines)


def test_flags_override_config(tmp_path):
    out = tmp_path / "r.jsonl"
    assert run_cli("extract", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--output", out, "--n-top", 3, "--lambda", 0) == 0
    rec = json.loads(out.read_text().splitlines()[0])
    assert len(rec["ranked"]) == 3 and rec["hyperparameters"]["lambda"] == 0.0


def test_empty_dataset(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "r.jsonl"
    assert run_cli("extract", "--config", EXAMPLE_CONFIG, "--dataset", empty, "--output", out) == 0
    assert out.read_text() == ""


def test_missing_lambda_exits_nonzero(tmp_path, capsys):
    code = run_cli("extract", "--kappa", 0.1, "--alpha", 1, "--sam-layer", 1, "--dataset", SAMPLES, "--output", tmp_path / "r")
    assert code == 1 and "lambda" in capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    assert run_cli("frobnicate") == 1
    assert run_cli("evaluate", "--results", "x") == 1


def test_runtime_errors_exit_two(tmp_path):
    assert run_cli("extract", "--config", EXAMPLE_CONFIG, "--dataset", tmp_path / "missing.jsonl") == 2


def test_evaluate_and_unknown_id(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    run_cli("extract", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--output", out)
    capsys.readouterr()
    assert run_cli("evaluate", "--results", out, "--dataset", SAMPLES, "--ks", 1) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("samples,full,1,")
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"document_id": "ghost", "ranked": []}) + "\n")
    assert run_cli("evaluate", "--results", bad, "--dataset", SAMPLES) == 2
    assert "ghost" in capsys.readouterr().err


def test_ablate_and_layer_sweep(tmp_path, capsys):
    csv_path = tmp_path / "abl.csv"
    assert run_cli("ablate", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--modes", "full", "baseline", "--csv", csv_path) == 0
    rows = csv_path.read_text().splitlines()
    assert len(rows) == 1 + 2 * 3
    assert run_cli("ablate", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--modes", "nope") == 1
    assert "valid:" in capsys.readouterr().err
    assert run_cli("layer-sweep", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--ks", 5) == 0
    out = capsys.readouterr().out.splitlines()
    assert [l.split(",")[1] for l in out[1:]] == ["layer-0", "layer-1"]


def test_drift_command(tmp_path):
    report = tmp_path / "drift.tsv"
    assert run_cli("drift", "--dataset", SAMPLES, "--report", report) == 0
    lines = report.read_text().splitlines()
    assert lines[0].startswith("document_id") and len(lines) == 5


def test_scaling_probe_single_size(tmp_path):
    report = tmp_path / "scale.txt"
    assert run_cli("scaling-probe", "--config", EXAMPLE_CONFIG, "--dataset", SAMPLES, "--sizes", 3, "--report", report) == 0
    text = report.read_text()
    assert len(text.splitlines()) == 2 and "R^2" not in text


def test_linear_fit():
    slope, intercept, r2 = linear_fit([1, 2, 3], [2, 4, 6])
    assert slope == pytest.approx(2) and intercept == pytest.approx(0, abs=1e-12) and r2 == pytest.approx(1)


def test_console_script_module_runs():
    out = subprocess.run([sys.executable, "-m", "contextkp.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "scaling-probe" in out.stdout
