"""Command-line entry points.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
Every run-config key is also a flag (``sam_layer`` -> ``--sam-layer``) that
overrides the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, config_keys, from_mapping, load_config
from .corpus import DatasetError, load_dataset, read_results, write_results

log = logging.getLogger("contextkp")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run config; flags below override its keys")
    g = p.add_argument_group("config overrides")
    for key in config_keys():
        g.add_argument("--" + key.replace("_", "-"), dest=f"cfg_{key}", metavar=key.upper(), default=None)


def _config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, f"cfg_{k}") for k in config_keys() if getattr(args, f"cfg_{k}", None) is not None}
    if args.config is not None:
        return load_config(args.config, overrides)
    return from_mapping(overrides)


def _dataset_path(args, cfg: RunConfig | None = None) -> Path:
    path = getattr(args, "dataset_path", None) or getattr(args, "cfg_dataset", None) or (cfg.dataset if cfg else None)
    if not path:
        raise ConfigError("no dataset given (use --dataset or the 'dataset' config key)")
    return Path(path)


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- subcommands -------------------------------------------------------------------


def cmd_extract(args) -> int:
    from .runner import run_extraction

    cfg = _config_from_args(args)
    docs = load_dataset(_dataset_path(args, cfg))
    out = Path(cfg.output or "results.jsonl")
    outcome = run_extraction(cfg, docs)
    write_results(outcome.records, out)
    errors_path = out.with_name(out.name + ".errors.jsonl")
    if outcome.errors:
        with open(errors_path, "w", encoding="utf-8") as fh:
            for err in outcome.errors:
                fh.write(json.dumps(err, ensure_ascii=False) + "\n")
        log.warning("%d document(s) failed; see %s", len(outcome.errors), errors_path)
    elif errors_path.exists():
        errors_path.unlink()
    log.info("wrote %d result record(s) to %s", len(outcome.records), out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate, write_reports

    docs = load_dataset(_dataset_path(args))
    results = read_results(args.results)
    report = evaluate(results, docs, args.ks, dataset=args.name or Path(_dataset_path(args)).stem, mode=args.mode, average=args.average)
    write_reports([report], args.csv, args.json)
    if args.csv is None:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .evaluation import ABLATION_MODES, check_modes, run_ablation, write_reports
    from .runner import build_extractor

    cfg = _config_from_args(args)
    try:
        modes = check_modes(args.modes or list(ABLATION_MODES))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = _dataset_path(args, cfg)
    docs = load_dataset(path)
    reports = run_ablation(build_extractor(cfg), docs, modes, args.ks, dataset=path.stem)
    write_reports(reports.values(), args.csv, args.json)
    if args.csv is None:
        sys.stdout.write("".join(r.to_csv(header=i == 0) for i, r in enumerate(reports.values())))
    return EXIT_OK


def cmd_layer_sweep(args) -> int:
    from .evaluation import layer_sweep, write_reports
    from .runner import build_extractor

    cfg = _config_from_args(args)
    path = _dataset_path(args, cfg)
    docs = load_dataset(path)
    extractor = build_extractor(cfg)
    layers = args.layers
    if layers is None:
        layers = list(range(extractor.backbone.encode_document("probe").attentions.shape[0]))
    reports = layer_sweep(extractor, docs, layers, args.ks, dataset=path.stem)
    write_reports(reports.values(), args.csv, args.json)
    if args.csv is None:
        sys.stdout.write("".join(r.to_csv(header=i == 0) for i, r in enumerate(reports.values())))
    return EXIT_OK


def cmd_scaling_probe(args) -> int:
    from .runner import scaling_probe

    cfg = _config_from_args(args)
    docs = load_dataset(_dataset_path(args, cfg))
    report = scaling_probe(cfg, docs, args.sizes, repeats=args.repeats)
    _write_text(args.report, report.to_text())
    return EXIT_OK


def cmd_drift(args) -> int:
    from .evaluation import BackboneEmbedder, HashingEmbedder, topic_drift

    path = _dataset_path(args)
    docs = load_dataset(path)
    if args.embedder == "hashing":
        embedder = HashingEmbedder()
    else:
        from .runner import build_extractor

        embedder = BackboneEmbedder(build_extractor(_config_from_args(args)).backbone)
    lines = ["document_id\tunits\tdrift\tundefined"]
    defined = []
    for doc in docs:
        r = topic_drift(doc, embedder)
        lines.append(f"{doc.id}\t{r.units}\t{r.value:.6f}\t{int(r.undefined)}")
        if not r.undefined:
            defined.append(r.value)
    mean = sum(defined) / len(defined) if defined else 0.0
    lines.append(f"mean\t-\t{mean:.6f}\t{int(not defined)}")
    _write_text(args.report, "\n".join(lines))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contextkp", description="Occurrence-level unsupervised keyphrase extraction.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ks = dict(type=int, nargs="+", default=[5, 10, 15], help="cut-offs for F1@k")
    out_files = [("--csv", "metric CSV path (default: stdout)"), ("--json", "JSON report path")]

    p = sub.add_parser("extract", help="rank keyphrases for every document")
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="F1@k of stored results")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--dataset", dest="dataset_path", type=Path, required=True)
    p.add_argument("--ks", **ks)
    p.add_argument("--average", choices=("macro", "micro"), default="macro")
    p.add_argument("--mode", default="full", help="label for the mode column")
    p.add_argument("--name", help="dataset label (default: file stem)")
    for flag, help_ in out_files:
        p.add_argument(flag, type=Path, help=help_)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="F1@k for each ablation mode")
    _add_config_flags(p)
    p.add_argument("--modes", nargs="+")
    p.add_argument("--ks", **ks)
    for flag, help_ in out_files:
        p.add_argument(flag, type=Path, help=help_)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("layer-sweep", help="F1@k for each self-attention layer")
    _add_config_flags(p)
    p.add_argument("--layers", type=int, nargs="+")
    p.add_argument("--ks", **ks)
    for flag, help_ in out_files:
        p.add_argument(flag, type=Path, help=help_)
    p.set_defaults(func=cmd_layer_sweep)

    p = sub.add_parser("scaling-probe", help="wall time against corpus size")
    _add_config_flags(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 40])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--report", type=Path, help="output path (default: stdout)")
    p.set_defaults(func=cmd_scaling_probe)

    p = sub.add_parser("drift", help="per-document topic drift")
    _add_config_flags(p)
    p.add_argument("--embedder", choices=("hashing", "backbone"), default="hashing")
    p.add_argument("--report", type=Path, help="output path (default: stdout)")
    p.set_defaults(func=cmd_drift)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
