"""Command-line pipeline: synth, gen-labels, spotting-freqs, train, eval, report.

Every command accepts --config FILE (a JSON object of option names to
values); explicit flags override the file. All randomness flows from
explicit seed options, outputs are written atomically, and reruns with
identical inputs produce byte-identical files. Exit codes: 0 success,
2 usage/config, 3 data/integrity, 4 training divergence. Set SPML_LOG to
DEBUG/INFO/WARNING/ERROR to control verbosity.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import synth as synth_mod
from .bias import BiasModelSpec, spotting_frequencies
from .errors import ConfigError, SpmlError, TrainingError
from .ingest import (
    atomic_write_bytes,
    parse_annotations,
    parse_spotting,
    read_features,
    read_realization,
    write_frequencies,
    write_realization,
)
from .losses import LossSpec
from .metrics import MapTable, drop_report, render_markdown, report_json
from .sampling import generate_suite
from .trainer import TrainConfig, model_from_json, model_to_json, predict, train

log = logging.getLogger("spmlbias")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

_LOSS_FLAGS = {"an": "AN", "an-ls": "AN-LS", "role": "ROLE", "em": "EM"}


def _merge_config(args: argparse.Namespace, keys) -> dict:
    """Config-file values fill in for options not given on the command line."""
    merged = {key: getattr(args, key) for key in keys}
    if args.config is None:
        return merged
    try:
        loaded = json.loads(Path(args.config).read_text())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {args.config}: invalid JSON ({exc})") from None
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {args.config}: expected an object")
    for key, value in loaded.items():
        norm = key.replace("-", "_")
        if norm not in keys:
            raise ConfigError(f"config file {args.config}: unknown option {key!r}")
        if merged[norm] is None:
            merged[norm] = value
    return merged


def _require(cfg: dict, key: str):
    if cfg[key] is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, list):
        return [int(s) for s in raw]
    try:
        return [int(part) for part in str(raw).split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"seeds must be a comma-separated list of integers, got {raw!r}") from None


def _bias_spec(kind: str, epsilon, fallback: str, dataset, spotting_path) -> BiasModelSpec:
    frequencies = None
    if kind == "semantic":
        if spotting_path is None:
            raise ConfigError("the semantic bias model requires --spotting")
        points = parse_spotting(_read(spotting_path), dataset)
        frequencies = spotting_frequencies(dataset, points)
    return BiasModelSpec(
        kind=kind,
        epsilon=float(epsilon) if epsilon is not None else None,
        frequencies=frequencies,
        semantic_fallback=fallback,
    )


def cmd_gen_labels(args) -> int:
    keys = ("annotations", "bias", "seeds", "spotting", "epsilon", "semantic_fallback", "out")
    cfg = _merge_config(args, keys)
    dataset = parse_annotations(_read(_require(cfg, "annotations")))
    kind = _require(cfg, "bias")
    seeds = _parse_seeds(_require(cfg, "seeds"))
    spec = _bias_spec(
        kind, cfg["epsilon"], cfg["semantic_fallback"] or "uniform", dataset, cfg["spotting"]
    )
    outdir = Path(_require(cfg, "out"))
    outdir.mkdir(parents=True, exist_ok=True)
    for realization in generate_suite(dataset, [spec], seeds):
        buf = io.BytesIO()
        write_realization(realization, buf)
        path = outdir / f"{kind}_seed{realization.seed}.json"
        atomic_write_bytes(path, buf.getvalue())
        print(path)
    return EXIT_OK


def cmd_spotting_freqs(args) -> int:
    keys = ("annotations", "spotting", "out")
    cfg = _merge_config(args, keys)
    dataset = parse_annotations(_read(_require(cfg, "annotations")))
    points = parse_spotting(_read(_require(cfg, "spotting")), dataset)
    freqs = spotting_frequencies(dataset, points)
    buf = io.BytesIO()
    write_frequencies(freqs, dataset.categories, buf)
    atomic_write_bytes(_require(cfg, "out"), buf.getvalue())
    print(cfg["out"])
    return EXIT_OK


def _loss_spec(cfg: dict) -> LossSpec:
    kind = _LOSS_FLAGS.get(str(_require(cfg, "loss")).lower())
    if kind is None:
        raise ConfigError(f"unknown loss {cfg['loss']!r} (expected one of {sorted(_LOSS_FLAGS)})")
    kw = {}
    if cfg["ls_epsilon"] is not None:
        kw["ls_epsilon"] = float(cfg["ls_epsilon"])
    if cfg["em_alpha"] is not None:
        kw["em_alpha"] = float(cfg["em_alpha"])
    if cfg["role_k"] is not None:
        kw["role_k"] = float(cfg["role_k"])
    if cfg["role_lambda"] is not None:
        kw["role_lambda"] = float(cfg["role_lambda"])
    return LossSpec(kind=kind, **kw)


def cmd_train(args) -> int:
    keys = (
        "features", "realization", "annotations", "loss",
        "ls_epsilon", "em_alpha", "role_k", "role_lambda",
        "learning_rate", "epochs", "batch_size", "optimizer", "shuffle_seed",
        "val_features", "val_annotations", "out",
    )
    cfg = _merge_config(args, keys)
    with open(_require(cfg, "features"), "rb") as fh:
        features = read_features(fh)
    with open(_require(cfg, "realization"), "rb") as fh:
        realization = read_realization(fh)
    dataset = parse_annotations(_read(_require(cfg, "annotations")))
    loss_spec = _loss_spec(cfg)
    train_cfg = TrainConfig(
        learning_rate=float(cfg["learning_rate"]) if cfg["learning_rate"] is not None else 1e-3,
        epochs=int(cfg["epochs"]) if cfg["epochs"] is not None else 25,
        batch_size=int(cfg["batch_size"]) if cfg["batch_size"] is not None else 16,
        optimizer=cfg["optimizer"] or "adam",
        shuffle_seed=int(cfg["shuffle_seed"]) if cfg["shuffle_seed"] is not None else 0,
    )
    val = None
    if (cfg["val_features"] is None) != (cfg["val_annotations"] is None):
        raise ConfigError("--val-features and --val-annotations must be given together")
    if cfg["val_features"] is not None:
        with open(cfg["val_features"], "rb") as fh:
            val_feats = read_features(fh)
        val_ds = parse_annotations(_read(cfg["val_annotations"]), split_tag="val")
        val = (val_feats, val_ds)
    model, run_log = train(features, realization, dataset.categories, loss_spec, train_cfg, val)
    atomic_write_bytes(_require(cfg, "out"), model_to_json(model))
    summary = f"final train loss {run_log.train_loss[-1]:.6f}" if run_log.train_loss else "no epochs"
    if run_log.best_epoch is not None:
        summary += f", best epoch {run_log.best_epoch} (val MAP {max(run_log.val_map):.2f})"
    print(f"{cfg['out']}: {summary}")
    return EXIT_OK


def cmd_eval(args) -> int:
    keys = ("model", "features", "annotations", "out", "loss", "bias", "seed")
    cfg = _merge_config(args, keys)
    model = model_from_json(_read(_require(cfg, "model")))
    with open(_require(cfg, "features"), "rb") as fh:
        features = read_features(fh)
    dataset = parse_annotations(_read(_require(cfg, "annotations")), split_tag="test")
    scores = predict(model, features)
    import numpy as np

    from .metrics import mean_average_precision

    labels = np.array([dataset.image(i).labels for i in features.image_ids])
    value = mean_average_precision(scores, labels)
    doc = {"map": value}
    if cfg["loss"] is not None:
        doc["loss"] = _LOSS_FLAGS.get(str(cfg["loss"]).lower(), str(cfg["loss"]))
    if cfg["bias"] is not None:
        doc["bias"] = str(cfg["bias"])
    if cfg["seed"] is not None:
        doc["seed"] = int(cfg["seed"])
    payload = (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()
    atomic_write_bytes(_require(cfg, "out"), payload)
    print(f"{cfg['out']}: MAP {value:.2f}")
    return EXIT_OK


def cmd_report(args) -> int:
    keys = ("metrics", "out_json", "out_md")
    cfg = _merge_config(args, keys)
    metrics_dir = Path(_require(cfg, "metrics"))
    runs = []
    for path in sorted(metrics_dir.glob("*.json")):
        try:
            doc = json.loads(path.read_text())
        except ValueError:
            log.warning("skipping unreadable metrics file %s", path)
            continue
        if not isinstance(doc, dict) or "map" not in doc:
            log.warning("skipping non-metrics file %s", path)
            continue
        if "loss" not in doc or "bias" not in doc:
            log.warning("skipping untagged metrics file %s", path)
            continue
        runs.append((str(doc["loss"]), str(doc["bias"]), float(doc["map"])))
    if not runs:
        raise ConfigError(f"no tagged metrics files found in {metrics_dir}")
    table = MapTable.from_runs(runs)
    missing = [cell for cell, value in table.cells.items() if value is None]
    if missing:
        log.warning("missing runs for %d (loss, bias) cells: %s", len(missing), missing)
    drops = None
    if "uniform" in table.biases and len(table.biases) > 1:
        drops = drop_report(table)
    else:
        log.warning("no uniform column; omitting the drop report")
    atomic_write_bytes(_require(cfg, "out_json"), report_json(table, drops))
    atomic_write_bytes(_require(cfg, "out_md"), render_markdown(table, drops).encode())
    print(cfg["out_json"])
    print(cfg["out_md"])
    return EXIT_OK


def cmd_synth(args) -> int:
    keys = (
        "out", "n_train", "n_test", "categories", "dim", "objects_min", "objects_max",
        "size_skew", "spotting_freqs", "noise_sigma", "seed", "centered_object",
        "degenerate_class",
    )
    cfg = _merge_config(args, keys)

    def floats(raw):
        return tuple(float(v) for v in str(raw).split(","))

    def ints(raw):
        return tuple(int(v) for v in str(raw).split(","))

    try:
        synth_cfg = synth_mod.SynthConfig(
            n_train=int(cfg["n_train"]) if cfg["n_train"] is not None else 200,
            n_test=int(cfg["n_test"]) if cfg["n_test"] is not None else 100,
            n_categories=int(cfg["categories"]) if cfg["categories"] is not None else 5,
            feature_dim=int(cfg["dim"]) if cfg["dim"] is not None else 32,
            objects_min=int(cfg["objects_min"]) if cfg["objects_min"] is not None else 1,
            objects_max=int(cfg["objects_max"]) if cfg["objects_max"] is not None else 4,
            size_skew=floats(cfg["size_skew"]) if cfg["size_skew"] is not None else None,
            spotting_freqs=ints(cfg["spotting_freqs"]) if cfg["spotting_freqs"] is not None else None,
            noise_sigma=float(cfg["noise_sigma"]) if cfg["noise_sigma"] is not None else 0.1,
            seed=int(cfg["seed"]) if cfg["seed"] is not None else 0,
            centered_object=bool(cfg["centered_object"]),
            degenerate_class=int(cfg["degenerate_class"]) if cfg["degenerate_class"] is not None else None,
        )
    except ValueError as exc:
        raise ConfigError(f"bad synth option: {exc}") from None
    corpus = synth_mod.generate(synth_cfg)
    for path in synth_mod.write_corpus(corpus, _require(cfg, "out")).values():
        print(path)
    return EXIT_OK


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of option values; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmlbias",
        description="Single-positive multi-label pipelines under annotator-bias models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-labels", help="sample single-positive realizations")
    _add_config(p)
    p.add_argument("--annotations")
    p.add_argument("--bias", choices=("uniform", "size", "location", "semantic"))
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--spotting", help="spotting JSON (semantic bias only)")
    p.add_argument("--epsilon", type=float, help="center-distance offset (location bias)")
    p.add_argument("--semantic-fallback", choices=("uniform", "error"))
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen_labels)

    p = sub.add_parser("spotting-freqs", help="count filtered spotting points per category")
    _add_config(p)
    p.add_argument("--annotations")
    p.add_argument("--spotting")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spotting_freqs)

    p = sub.add_parser("train", help="train a linear classifier on a realization")
    _add_config(p)
    p.add_argument("--features")
    p.add_argument("--realization")
    p.add_argument("--annotations")
    p.add_argument("--loss", choices=tuple(_LOSS_FLAGS))
    p.add_argument("--ls-epsilon", type=float)
    p.add_argument("--em-alpha", type=float)
    p.add_argument("--role-k", type=float)
    p.add_argument("--role-lambda", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--val-features")
    p.add_argument("--val-annotations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model and write a tagged metrics file")
    _add_config(p)
    p.add_argument("--model")
    p.add_argument("--features")
    p.add_argument("--annotations")
    p.add_argument("--loss", help="tag recorded in the metrics file")
    p.add_argument("--bias", help="tag recorded in the metrics file")
    p.add_argument("--seed", type=int, help="tag recorded in the metrics file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate metrics files into a MAP table")
    _add_config(p)
    p.add_argument("--metrics", help="directory of metrics JSON files")
    p.add_argument("--out-json")
    p.add_argument("--out-md")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="emit a deterministic synthetic corpus")
    _add_config(p)
    p.add_argument("--out")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--categories", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--objects-min", type=int)
    p.add_argument("--objects-max", type=int)
    p.add_argument("--size-skew", help="comma-separated per-category box scales")
    p.add_argument("--spotting-freqs", help="comma-separated per-category point counts")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--centered-object", action="store_true", default=None)
    p.add_argument("--degenerate-class", type=int)
    p.set_defaults(func=cmd_synth)

    return parser


def _setup_logging() -> None:
    level = os.environ.get("SPML_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpmlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
