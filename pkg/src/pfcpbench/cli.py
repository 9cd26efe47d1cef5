"""Batch command-line surface: preprocess -> train -> evaluate -> attack -> report.

Every command is an idempotent writer into a content-addressed run
directory derived from the (flag-merged) config, so re-running a step with
the same configuration reproduces byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import attack as attack_mod
from . import corpus as corpus_mod
from . import detectors as det_mod
from . import ensemble as ens_mod
from . import evaluate as eval_mod
from . import errors, preprocess
from .config import DetectorEntry, RunConfig, load_run_config, parse_algorithm
from .seeding import derive_seed
from .traffic import ClassLabel, FeatureSchema, LabeledDataset

logger = logging.getLogger("pfcpbench")

EXIT_CODES = {
    errors.IoError: 2,
    errors.SchemaError: 3,
    errors.GuidelineViolation: 4,
    errors.FitError: 5,
    errors.PipelineError: 6,
    errors.GridSearchError: 7,
    errors.MetricError: 8,
    errors.MarginalsError: 9,
    errors.BudgetExhausted: 10,
    errors.ComplianceViolation: 11,
    errors.ConfigError: 12,
}

SPLIT_NAMES = ("train", "validation", "test")


def _schema_for(cfg: RunConfig) -> FeatureSchema:
    if cfg.schema == "default":
        return corpus_mod.default_schema()
    return FeatureSchema.load(cfg.schema)


def _raw_splits(cfg: RunConfig, run_dir: Path) -> tuple[LabeledDataset, ...]:
    """Raw splits: persisted corpus CSVs win, then split sources, then the
    synthetic generator."""
    schema = _schema_for(cfg)
    corpus_dir = run_dir / "corpus"
    csvs = [corpus_dir / f"{name}.csv" for name in SPLIT_NAMES]
    if all(p.exists() for p in csvs):
        return tuple(corpus_mod.load_csv(p, schema) for p in csvs)
    if cfg.splits is not None:
        return corpus_mod.build_splits(cfg.splits, schema)
    synth = cfg.synth or {}
    return corpus_mod.synth_benchmark_splits(
        seed=derive_seed(cfg.seed, "corpus"),
        schema=schema,
        scale=float(synth.get("scale", 0.1)),
        noise_scale=float(synth.get("noise_scale", 1.0)),
    )


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise errors.ConfigError("synth command needs corpus.synth in the config")
    run_dir = cfg.run_dir()
    corpus_dir = run_dir / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    schema = _schema_for(cfg)
    splits = corpus_mod.synth_benchmark_splits(
        seed=derive_seed(cfg.seed, "corpus"),
        schema=schema,
        scale=float(cfg.synth.get("scale", 0.1)),
        noise_scale=float(cfg.synth.get("noise_scale", 1.0)),
    )
    for name, ds in zip(SPLIT_NAMES, splits):
        corpus_mod.save_csv(ds, corpus_dir / f"{name}.csv", seed=cfg.seed)
        logger.info("wrote %s (%d rows)", corpus_dir / f"{name}.csv", len(ds))
    print(run_dir)
    return 0


def cmd_preprocess(cfg: RunConfig) -> int:
    run_dir = cfg.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    train, validation, test = _raw_splits(cfg, run_dir)
    patterns = cfg.gt1_patterns or preprocess.DEFAULT_GT1_PATTERNS
    model = preprocess.fit_pipeline(train, scaling_enabled=cfg.scaling, gt1_patterns=patterns)
    model.save(run_dir / "pipeline.json")
    out_dir = run_dir / "preprocessed"
    out_dir.mkdir(exist_ok=True)
    for name, ds in zip(SPLIT_NAMES, (train, validation, test)):
        transformed = preprocess.transform(model, ds)
        corpus_mod.save_csv(transformed, out_dir / f"{name}.csv", seed=cfg.seed)
    (run_dir / "drop_report.json").write_text(
        json.dumps(dict(sorted(model.drop_report.items())), indent=2, sort_keys=True)
    )
    logger.info(
        "pipeline kept %d features, dropped %d", len(model.kept_features), len(model.drop_report)
    )
    print(run_dir)
    return 0


def _load_preprocessed(run_dir: Path) -> tuple[preprocess.PipelineModel, dict[str, LabeledDataset]]:
    pipeline_path = run_dir / "pipeline.json"
    if not pipeline_path.exists():
        raise errors.ConfigError(f"{pipeline_path} missing; run the preprocess command first")
    model = preprocess.PipelineModel.load(pipeline_path)
    splits = {}
    for name in SPLIT_NAMES:
        path = run_dir / "preprocessed" / f"{name}.csv"
        if not path.exists():
            raise errors.ConfigError(f"{path} missing; run the preprocess command first")
        splits[name] = corpus_mod.load_csv(path, model.output_schema)
    return model, splits


def cmd_train(cfg: RunConfig) -> int:
    run_dir = cfg.run_dir()
    _, splits = _load_preprocessed(run_dir)
    train, validation = splits["train"], splits["validation"]
    models_dir = run_dir / "models"
    models_dir.mkdir(exist_ok=True)
    train_log: dict[str, dict] = {}

    fitted: dict[det_mod.DetectorKind, det_mod.DetectorModel] = {}
    entries = {entry.kind: entry for entry in cfg.detectors}
    # ensembles pull in any missing base kinds automatically
    for name in cfg.ensembles:
        for kind in ens_mod.PRESETS[name].base_kinds:
            entries.setdefault(kind, DetectorEntry(kind=kind))

    for kind, entry in entries.items():
        label = kind.value
        try:
            seed = derive_seed(cfg.seed, "fit", label)
            if entry.grid:
                config, log = det_mod.grid_search(
                    kind, entry.grid, train, validation,
                    contamination=entry.contamination, seed=seed,
                )
                (models_dir / f"grid_{label}.json").write_text(
                    json.dumps(log, indent=2, sort_keys=True)
                )
            else:
                config = det_mod.DetectorConfig(
                    kind=kind, params=entry.params, contamination=entry.contamination
                )
            model = det_mod.fit(config, train, seed=seed)
            model.save(models_dir / f"{label}.json")
            fitted[kind] = model
            train_log[label] = {"status": "ok", "params": config.params, "tau": model.tau}
            logger.info("fitted %s (tau=%.6g)", label, model.tau)
        except errors.PfcpBenchError as exc:
            train_log[label] = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
            logger.error("%s failed: %s", label, exc)

    for name in cfg.ensembles:
        spec = ens_mod.PRESETS[name]
        try:
            bases = [fitted[kind] for kind in spec.base_kinds]
        except KeyError as exc:
            train_log[name] = {"status": "error", "error": f"missing base {exc}"}
            continue
        try:
            model = ens_mod.fit_ensemble(
                spec, bases, validation, seed=derive_seed(cfg.seed, "fit", name)
            )
            model.save(models_dir / f"{name}.json")
            train_log[name] = {"status": "ok", "train_accuracy": model.train_accuracy}
            logger.info("fitted ensemble %s (train acc %.4f)", name, model.train_accuracy)
        except errors.PfcpBenchError as exc:
            train_log[name] = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
            logger.error("ensemble %s failed: %s", name, exc)

    (run_dir / "train_log.json").write_text(json.dumps(train_log, indent=2, sort_keys=True))
    print(run_dir)
    return 0


def load_any_model(path: Path):
    doc = json.loads(path.read_text())
    fmt = doc.get("format")
    if fmt == "pfcpbench-detector-v1":
        return det_mod.DetectorModel.from_json_dict(doc)
    if fmt == "pfcpbench-ensemble-v1":
        return ens_mod.EnsembleModel.load(path)
    raise errors.SchemaError(f"{path}: unknown model container format {fmt!r}")


def _trained_models(run_dir: Path, names: tuple[str, ...] | None) -> list[tuple[str, object]]:
    models_dir = run_dir / "models"
    if not models_dir.exists():
        raise errors.ConfigError(f"{models_dir} missing; run the train command first")
    out = []
    for path in sorted(models_dir.glob("*.json")):
        if path.name.startswith("grid_"):
            continue
        name = path.stem
        if names is not None and name not in names:
            continue
        try:
            out.append((name, load_any_model(path)))
        except errors.SchemaError:
            logger.warning("skipping unreadable model container %s", path)
    if names:
        missing = set(names) - {n for n, _ in out}
        for name in sorted(missing):
            logger.warning("model %s not found, skipped", name)
    return out


def cmd_evaluate(cfg: RunConfig) -> int:
    run_dir = cfg.run_dir()
    pipeline, splits = _load_preprocessed(run_dir)
    test = splits["test"]
    models = _trained_models(run_dir, None)
    if not models:
        raise errors.ConfigError("no trained models to evaluate")
    y = np.array([lab is not ClassLabel.NORMAL for lab in test.labels], dtype=bool)
    X = test.to_matrix()
    rows = [
        eval_mod.metrics_row(name, model.score_batch(X), y, model.tau, pipeline.scaling_enabled)
        for name, model in models
    ]
    matrix = eval_mod.detection_matrix(models, test)
    eval_mod.emit_report(rows, matrix, None, run_dir)
    print(run_dir)
    return 0


def _feasible_features(cfg: RunConfig) -> dict[ClassLabel, tuple[str, ...]]:
    features = {
        kind: attack_mod.DEFAULT_CONTROLLABLE_FEATURES
        for kind in attack_mod.DEFAULT_COMPLIANCE_RULES
    }
    if cfg.j_config:
        doc = attack_mod.load_feasible_config(cfg.j_config)
        for class_value, entry in doc.items():
            features[ClassLabel(class_value)] = tuple(entry.get("features", ()))
    return features


def _feasible_narrow(cfg: RunConfig) -> dict[ClassLabel, dict]:
    if not cfg.j_config:
        return {}
    doc = attack_mod.load_feasible_config(cfg.j_config)
    return {
        ClassLabel(class_value): entry["narrow"]
        for class_value, entry in doc.items()
        if entry.get("narrow")
    }


def cmd_attack(cfg: RunConfig) -> int:
    run_dir = cfg.run_dir()
    pipeline, splits = _load_preprocessed(run_dir)
    train, test = splits["train"], splits["test"]
    attack_rows = test.subset(
        np.array([lab is not ClassLabel.NORMAL for lab in test.labels], dtype=bool)
    )
    models = _trained_models(run_dir, cfg.attack_targets)
    if not models:
        raise errors.ConfigError("no trained models to attack")
    specs = {
        kind: attack_mod.scale_compliance(spec, pipeline)
        for kind, spec in attack_mod.DEFAULT_COMPLIANCE_RULES.items()
    }
    features = _feasible_features(cfg)
    narrow = _feasible_narrow(cfg)
    marginals_source = train if cfg.marginals_source == "train" else attack_rows

    groups = []
    for name, model in models:
        for algorithm in cfg.algorithms:
            attack_cfg = attack_mod.AttackConfig(
                algorithm=algorithm,
                popsize=cfg.popsize,
                budget=cfg.budget,
                seed=derive_seed(cfg.seed, "campaign", name),
                rs_retries=cfg.rs_retries,
            )
            outcomes = attack_mod.run_campaign(
                model, attack_rows, features, specs, attack_cfg, marginals_source, narrow
            )
            attack_mod.write_outcomes_jsonl(
                outcomes,
                attack_rows.schema,
                run_dir / f"campaign-{name}-{algorithm}.jsonl",
                include_trace=cfg.include_traces,
            )
            groups.append((name, algorithm, pipeline.scaling_enabled, outcomes))
            logger.info(
                "%s vs %s: %d/%d evaded",
                algorithm, name, sum(o.evaded for o in outcomes), len(outcomes),
            )
    rows = eval_mod.evasion_table(groups)
    eval_mod.emit_report(None, None, rows, run_dir)
    print(run_dir)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Consolidate evaluate/attack outputs under report/."""
    run_dir = cfg.run_dir()
    report_dir = run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    found = False
    for name in ("metrics.json", "metrics.csv", "evasion.json", "evasion.csv", "detection_matrix.csv"):
        src = run_dir / name
        if src.exists():
            (report_dir / name).write_text(src.read_text())
            found = True
        else:
            logger.warning("%s not present yet", src)
    if not found:
        raise errors.ConfigError("nothing to report; run evaluate and/or attack first")
    print(report_dir)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "attack": cmd_attack,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfcpbench",
        description="Train, evaluate, and adversarially stress-test PFCP anomaly detectors.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run-config JSON document")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="override the output root directory")
    parser.add_argument(
        "--no-scale", action="store_true", help="disable robust scaling in the pipeline"
    )
    parser.add_argument(
        "--ensemble", action="append", default=None, metavar="NAME",
        help="add an ensemble preset (repeatable)",
    )
    parser.add_argument(
        "--algorithm", action="append", default=None, metavar="ALGO",
        help="restrict attack algorithms (rs, ga-de, ga-es; repeatable)",
    )
    parser.add_argument("--budget", type=int, default=None, help="override the attack query budget")
    parser.add_argument(
        "--rs-retries", type=int, default=None,
        help="random-search draws per sample (default 1)",
    )
    parser.add_argument(
        "--trace", action="store_true", help="include per-query traces in campaign output"
    )
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    raw_doc = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else {}
    if args.no_scale:
        pipeline = dict(raw_doc.get("pipeline", {}))
        pipeline["scaling"] = False
        overrides["pipeline"] = pipeline
    attack_doc = dict(raw_doc.get("attack", {}))
    touched = False
    if args.ensemble:
        overrides["ensembles"] = sorted(set(raw_doc.get("ensembles", [])) | set(args.ensemble))
    if args.algorithm:
        attack_doc["algorithms"] = [parse_algorithm(a) for a in args.algorithm]
        touched = True
    if args.budget is not None:
        attack_doc["budget"] = args.budget
        touched = True
    if args.rs_retries is not None:
        attack_doc["rs_retries"] = args.rs_retries
        touched = True
    if args.trace:
        attack_doc["include_traces"] = True
        touched = True
    if touched:
        overrides["attack"] = attack_doc
    return overrides


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config, overrides=_overrides(args))
        return COMMANDS[args.command](cfg)
    except errors.PfcpBenchError as exc:
        code = EXIT_CODES.get(type(exc), 1)
        print(f"error[{type(exc).__name__}] {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
