"""Declarative run configuration.

One JSON document drives the whole batch pipeline; a single master seed
fans out to every stochastic component, and the canonical config hash
names the run directory so re-runs are idempotent.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .attack import ALGORITHMS, GA_DE, GA_ES, RS
from .corpus import DEFAULT_LABEL_COLUMN, SplitSource, SplitSpec
from .detectors import DEFAULT_CONTAMINATION, DetectorKind
from .ensemble import PRESETS
from .errors import ConfigError
from .traffic import ClassLabel

_ALGORITHM_ALIASES = {
    "rs": RS,
    "ga-de": GA_DE,
    "ga_de": GA_DE,
    "ga-es": GA_ES,
    "ga_es": GA_ES,
}


def parse_algorithm(name: str) -> str:
    key = name.strip().lower()
    if key in _ALGORITHM_ALIASES:
        return _ALGORITHM_ALIASES[key]
    if name.strip().upper() in ALGORITHMS:
        return name.strip().upper()
    raise ConfigError(f"unknown attack algorithm {name!r}")


@dataclass(frozen=True)
class DetectorEntry:
    kind: DetectorKind
    params: dict = field(default_factory=dict)
    grid: dict | None = None
    contamination: float = DEFAULT_CONTAMINATION


@dataclass(frozen=True)
class RunConfig:
    seed: int
    out: str
    schema: str  # "default" or a schema JSON path
    synth: dict | None  # {"scale": float, "noise_scale": float}
    splits: SplitSpec | None
    scaling: bool
    gt1_patterns: tuple[str, ...] | None
    detectors: tuple[DetectorEntry, ...]
    ensembles: tuple[str, ...]
    algorithms: tuple[str, ...]
    budget: int
    popsize: int
    attack_targets: tuple[str, ...] | None  # None = every trained model
    j_config: str | None
    marginals_source: str  # "train" or "attack"
    rs_retries: int
    include_traces: bool
    raw: dict = field(compare=False, default_factory=dict)

    def run_hash(self) -> str:
        doc = dict(self.raw)
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def run_dir(self) -> Path:
        return Path(self.out) / f"run-{self.run_hash()}"


def _parse_sources(entries: Sequence[dict]) -> tuple[SplitSource, ...]:
    out = []
    for entry in entries:
        include = entry.get("include")
        out.append(
            SplitSource(
                path=entry["path"],
                include=None if include is None else tuple(ClassLabel(v) for v in include),
                label_column=entry.get("label_column", DEFAULT_LABEL_COLUMN),
            )
        )
    return tuple(out)


def load_run_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate the run-config document, applying CLI overrides.

    Overrides become part of the canonical config, so a flag change maps
    to a different run directory.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value

    seed = int(doc.get("seed", 42))
    out = str(doc.get("out", "runs"))
    schema = str(doc.get("schema", "default"))
    if schema != "default" and not Path(schema).exists():
        raise ConfigError(f"schema file {schema} does not exist")

    corpus_doc = doc.get("corpus", {"synth": {"scale": 0.1}})
    synth = corpus_doc.get("synth")
    splits = None
    if corpus_doc.get("splits"):
        sdoc = corpus_doc["splits"]
        splits = SplitSpec(
            train_sources=_parse_sources(sdoc.get("train", [])),
            val_sources=_parse_sources(sdoc.get("validation", [])),
            test_sources=_parse_sources(sdoc.get("test", [])),
        )
        for sources in (splits.train_sources, splits.val_sources, splits.test_sources):
            for src in sources:
                if not Path(src.path).exists():
                    raise ConfigError(f"split source {src.path} does not exist")
    if synth is None and splits is None:
        raise ConfigError("config needs corpus.synth or corpus.splits")

    pipeline_doc = doc.get("pipeline", {})
    scaling = bool(pipeline_doc.get("scaling", True))
    patterns = pipeline_doc.get("gt1_patterns")

    detectors = []
    for entry in doc.get("detectors", []):
        detectors.append(
            DetectorEntry(
                kind=DetectorKind.parse(entry["kind"]),
                params=dict(entry.get("params", {})),
                grid=entry.get("grid"),
                contamination=float(entry.get("contamination", DEFAULT_CONTAMINATION)),
            )
        )

    ensembles = tuple(doc.get("ensembles", []))
    for name in ensembles:
        if name not in PRESETS:
            raise ConfigError(f"unknown ensemble preset {name!r} (have {sorted(PRESETS)})")

    attack_doc = doc.get("attack", {})
    algorithms = tuple(parse_algorithm(a) for a in attack_doc.get("algorithms", ["RS", "GA_DE", "GA_ES"]))
    j_config = attack_doc.get("j_config")
    if j_config is not None and not Path(j_config).exists():
        raise ConfigError(f"feasible-set config {j_config} does not exist")
    marginals_source = attack_doc.get("marginals", "train")
    if marginals_source not in ("train", "attack"):
        raise ConfigError("attack.marginals must be 'train' or 'attack'")
    targets = attack_doc.get("targets")

    return RunConfig(
        seed=seed,
        out=out,
        schema=schema,
        synth=synth,
        splits=splits,
        scaling=scaling,
        gt1_patterns=None if patterns is None else tuple(patterns),
        detectors=tuple(detectors),
        ensembles=ensembles,
        algorithms=algorithms,
        budget=int(attack_doc.get("budget", 100)),
        popsize=int(attack_doc.get("popsize", 20)),
        attack_targets=None if targets is None else tuple(targets),
        j_config=j_config,
        marginals_source=marginals_source,
        rs_retries=int(attack_doc.get("rs_retries", 1)),
        include_traces=bool(attack_doc.get("include_traces", False)),
        raw=doc,
    )
