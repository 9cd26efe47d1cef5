"""Black-box evasion engine.

An attacker who can observe detector scores and the threshold, but nothing
else, perturbs only a feasible index set J of an initially-detected attack
sample, sampling replacement values from empirical marginals of observable
traffic.  Every queried candidate must be feasible (untouched outside J,
in-domain inside J) and compliant (protected fields intact, class
predicates holding), and each sample has a strict oracle-query budget.

Three optimizers solve the resulting positive-part minimization: a
single-draw random search and two genetic variants, one built on
differential mutation with two-point crossover and one on recombination
plus per-gene resampling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    BudgetExhausted,
    ComplianceViolation,
    ConfigError,
    MarginalsError,
    SchemaError,
)
from .preprocess import PipelineModel
from .seeding import rng_for
from .traffic import (
    CATEGORICAL,
    ClassLabel,
    CategoricalDomain,
    FeatureSchema,
    LabeledDataset,
    NumericDomain,
)

logger = logging.getLogger(__name__)

RS = "RS"
GA_DE = "GA_DE"
GA_ES = "GA_ES"
ALGORITHMS = (RS, GA_DE, GA_ES)

_RELATIONS: dict[str, Callable[[float, float], bool]] = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


@dataclass(frozen=True)
class ComplianceSpec:
    """Protocol-compliance contract of one attack class.

    ``protected`` fields must keep their original values; ``predicates``
    are (feature, relation, value) triples that must hold on every
    candidate.  Values live in the same representation as the vectors
    being checked (categorical values are domain labels).
    """

    attack_class: ClassLabel
    protected: frozenset[str]
    predicates: tuple[tuple[str, str, object], ...]

    def __post_init__(self):
        for _, relation, _ in self.predicates:
            if relation not in _RELATIONS:
                raise SchemaError(f"unknown predicate relation {relation!r}")


# Raw-space compliance rules matching the synthetic attack generator: the
# predicate fields carry each class's malicious function, the remaining
# protected fields are tool artifacts whose alteration would break message
# parsing or session targeting.
DEFAULT_COMPLIANCE_RULES: dict[ClassLabel, ComplianceSpec] = {
    ClassLabel.RESTORATION_TEID: ComplianceSpec(
        ClassLabel.RESTORATION_TEID,
        frozenset({"pfcp.f_teid.teid", "pfcp.flags", "pfcp.s"}),
        (("pfcp.f_teid.teid", ">", 65536.0),),
    ),
    ClassLabel.FLOOD: ComplianceSpec(
        ClassLabel.FLOOD,
        frozenset({"pfcp.msg_type", "pfcp.flags", "pfcp.s"}),
        (("pfcp.msg_type", "=", "50"),),
    ),
    ClassLabel.DELETION: ComplianceSpec(
        ClassLabel.DELETION,
        frozenset({"pfcp.msg_type", "pfcp.flags", "pfcp.s", "pfcp.seid"}),
        (("pfcp.msg_type", "=", "54"), ("pfcp.s", "=", "1")),
    ),
    ClassLabel.MODIFICATION: ComplianceSpec(
        ClassLabel.MODIFICATION,
        frozenset({"pfcp.msg_type", "pfcp.apply_action.forw", "pfcp.seid"}),
        (("pfcp.msg_type", "=", "52"), ("pfcp.apply_action.forw", "=", "0")),
    ),
    ClassLabel.PDN0_FAULT: ComplianceSpec(
        ClassLabel.PDN0_FAULT,
        frozenset({"pfcp.pdn_type", "pfcp.flags"}),
        (("pfcp.pdn_type", "=", "0"),),
    ),
}

# Accounting, timing, and marking fields an attacker can set freely without
# touching any class's protected set.
DEFAULT_CONTROLLABLE_FEATURES = (
    "ip.dsfield.dscp",
    "ip.ttl",
    "ip.len",
    "udp.length",
    "pfcp.length",
    "pfcp.seqno",
    "pfcp.ie_len",
    "pfcp.duration_measurement",
    "pfcp.recovery_time_stamp",
    "pfcp.volume_measurement.tovol",
    "pfcp.volume_measurement.dlvol",
)


def scale_compliance(spec: ComplianceSpec, pipeline: PipelineModel) -> ComplianceSpec:
    """Re-express raw-value numeric predicates in the pipeline's output space.

    Robust scaling is a strictly increasing per-feature affine map, so the
    relation direction is preserved; categorical predicates are untouched.
    """
    missing = [name for name, _, _ in spec.predicates if name not in pipeline.kept_features]
    missing += [name for name in spec.protected if name not in pipeline.kept_features]
    if missing:
        raise ConfigError(
            f"{spec.attack_class.value}: compliance references dropped features {sorted(set(missing))}"
        )
    if not pipeline.scaling_enabled or pipeline.scaler_state is None:
        return spec
    predicates = []
    for name, relation, value in spec.predicates:
        desc = pipeline.output_schema.descriptor(name)
        if desc.kind == CATEGORICAL:
            predicates.append((name, relation, value))
        else:
            med, scale = pipeline.scaler_state.scale_of(name)
            predicates.append((name, relation, (float(value) - med) / scale))
    return ComplianceSpec(spec.attack_class, spec.protected, tuple(predicates))


@dataclass(frozen=True)
class FeasibleSet:
    """Indices the attacker may modify, with their per-index value domains."""

    indices: tuple[int, ...]
    domains: dict  # position -> CategoricalDomain | NumericDomain

    def __len__(self) -> int:
        return len(self.indices)


def build_feasible_set(
    schema: FeatureSchema,
    feature_names: Sequence[str],
    compliance: ComplianceSpec,
    narrow: Mapping[str, object] | None = None,
) -> FeasibleSet:
    """Resolve controllable feature names to schema positions.

    Raises when a requested feature collides with the attack class's
    protected set: modifying those would break the attack itself.
    """
    overlap = set(feature_names) & set(compliance.protected)
    if overlap:
        raise ConfigError(
            f"{compliance.attack_class.value}: feasible set overlaps protected fields "
            f"{sorted(overlap)}"
        )
    indices = []
    domains = {}
    narrow = narrow or {}
    for name in feature_names:
        pos = schema.position(name)
        desc = schema.features[pos]
        domain = desc.domain
        if name in narrow:
            spec = narrow[name]
            if desc.kind == CATEGORICAL:
                labels = tuple(spec["labels"])
                bad = set(labels) - set(domain.labels)
                if bad:
                    raise ConfigError(f"{name}: narrowed labels {sorted(bad)} not in domain")
                domain = CategoricalDomain(labels)
            else:
                lo = max(float(spec["lo"]), domain.lo)
                hi = min(float(spec["hi"]), domain.hi)
                domain = NumericDomain(lo, hi)
        indices.append(pos)
        domains[pos] = domain
    return FeasibleSet(indices=tuple(sorted(indices)), domains=domains)


def load_feasible_config(path) -> dict[str, dict]:
    """J-config file: JSON mapping attack class value -> feature list and
    optional per-feature domain narrowing."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ConfigError("feasible-set config must be a JSON object")
    return doc


# ---------------------------------------------------------------------------
# Feasibility / compliance checks


def _domain_ok(desc, domain, value: float) -> bool:
    if isinstance(domain, CategoricalDomain):
        code = int(value)
        if value != code:
            return False
        # narrowed categorical domains hold a subset of the original labels;
        # the code still indexes the full schema domain
        full = desc.domain
        return 0 <= code < len(full) and full.labels[code] in domain.labels
    return domain.contains(float(value))


def check_feasible(
    x: np.ndarray, candidate: np.ndarray, feasible: FeasibleSet, schema: FeatureSchema
) -> bool:
    """Candidate equals x outside J and stays in-domain inside J."""
    x = np.asarray(x, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != x.shape or candidate.shape != (len(schema),):
        return False
    mask = np.ones(len(schema), dtype=bool)
    for j in feasible.indices:
        mask[j] = False
    if not np.array_equal(candidate[mask], x[mask]):
        return False
    for j in feasible.indices:
        if not _domain_ok(schema.features[j], feasible.domains[j], candidate[j]):
            return False
    return True


def check_compliant(
    spec: ComplianceSpec,
    schema: FeatureSchema,
    candidate: np.ndarray,
    original: np.ndarray | None = None,
) -> bool:
    """All predicates hold; protected fields equal the original when given."""
    candidate = np.asarray(candidate, dtype=float)
    if original is not None:
        for name in spec.protected:
            pos = schema.position(name)
            if candidate[pos] != original[pos]:
                return False
    for name, relation, value in spec.predicates:
        pos = schema.position(name)
        desc = schema.features[pos]
        if desc.kind == CATEGORICAL:
            code = desc.domain.code_of(str(value))
            if not _RELATIONS[relation](float(candidate[pos]), float(code)):
                return False
        else:
            if not _RELATIONS[relation](float(candidate[pos]), float(value)):
                return False
    return True


# ---------------------------------------------------------------------------
# Empirical marginals


@dataclass
class Marginals:
    """Per-index empirical sampling distributions.

    Categorical entries hold (codes, frequencies); numerical entries hold
    the observed value multiset.  Sampling can only return values seen in
    the source and inside the index's domain.
    """

    entries: dict  # position -> ("cat", codes, probs) | ("num", values, None)

    def sample(self, j: int, rng: np.random.Generator) -> float:
        kind, values, probs = self.entries[j]
        if kind == "cat":
            return float(rng.choice(values, p=probs))
        return float(values[rng.integers(len(values))])

    def positions(self) -> tuple[int, ...]:
        return tuple(sorted(self.entries))


def estimate_marginals(source: LabeledDataset, feasible: FeasibleSet) -> Marginals:
    """Frequency tables / value multisets over the source, restricted to
    each feasible index's domain."""
    if len(source) == 0:
        raise MarginalsError("cannot estimate marginals from an empty source")
    M = source.to_matrix()
    schema = source.schema
    entries = {}
    for j in feasible.indices:
        desc = schema.features[j]
        domain = feasible.domains[j]
        col = M[:, j]
        if desc.kind == CATEGORICAL:
            keep = np.array([_domain_ok(desc, domain, v) for v in col], dtype=bool)
            observed = col[keep].astype(int)
            if observed.size == 0:
                raise MarginalsError(f"{desc.name}: no in-domain source values")
            codes, counts = np.unique(observed, return_counts=True)
            entries[j] = ("cat", codes.astype(float), counts / counts.sum())
        else:
            keep = (col >= domain.lo) & (col <= domain.hi) & np.isfinite(col)
            observed = np.sort(col[keep])
            if observed.size == 0:
                raise MarginalsError(f"{desc.name}: no in-domain source values")
            entries[j] = ("num", observed, None)
    return Marginals(entries=entries)


# ---------------------------------------------------------------------------
# Oracle with budget accounting


class QueryOracle:
    """Wraps the defender's score function behind the threat model.

    The attacker sees only fitness values max(0, score - tau); every call
    burns one unit of budget, and every candidate is verified feasible and
    compliant before the score function runs (a violation here is an
    optimizer bug, not a runtime condition).
    """

    def __init__(
        self,
        score_fn: Callable[[np.ndarray], float],
        tau: float,
        budget: int,
        schema: FeatureSchema,
        original: np.ndarray,
        feasible: FeasibleSet,
        compliance: ComplianceSpec,
    ):
        if budget < 1:
            raise ConfigError("oracle budget must be at least 1")
        self._score_fn = score_fn
        self.tau = tau
        self.budget = budget
        self.schema = schema
        self.original = np.asarray(original, dtype=float).copy()
        self.feasible = feasible
        self.compliance = compliance
        self.queries_used = 0
        self.trace: list[tuple[int, float]] = []
        self.best_candidate = self.original.copy()
        self.best_fitness = np.inf

    @property
    def remaining(self) -> int:
        return self.budget - self.queries_used

    def fitness(self, candidate: np.ndarray) -> float:
        if self.queries_used >= self.budget:
            raise BudgetExhausted(f"query budget of {self.budget} spent")
        if not check_feasible(self.original, candidate, self.feasible, self.schema):
            raise ComplianceViolation("optimizer produced an infeasible candidate")
        if not check_compliant(self.compliance, self.schema, candidate, self.original):
            raise ComplianceViolation("optimizer produced a non-compliant candidate")
        self.queries_used += 1
        value = max(0.0, float(self._score_fn(candidate)) - self.tau)
        self.trace.append((self.queries_used, value))
        if value < self.best_fitness:
            self.best_fitness = value
            self.best_candidate = np.asarray(candidate, dtype=float).copy()
        return value


def fitness(oracle: QueryOracle, candidate: np.ndarray) -> float:
    """Positive part of (score - tau); consumes one budget unit per call."""
    return oracle.fitness(candidate)


# ---------------------------------------------------------------------------
# Attack configuration and outcome


@dataclass(frozen=True)
class AttackConfig:
    algorithm: str = GA_DE
    popsize: int = 20
    budget: int = 100
    crossover: str = "two_point"  # DE recombination scheme
    diff_weight: float = 0.5  # differential mutation weight on numeric genes
    recombination_ratio: float = 0.9
    mutation_rate: float | None = None  # defaults to 1/|J|
    seed: int = 42
    rs_retries: int = 1  # single-draw random search by default

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown attack algorithm {self.algorithm!r}")
        if self.crossover != "two_point":
            raise ConfigError(f"unsupported crossover scheme {self.crossover!r}")
        if min(self.popsize, self.budget, self.rs_retries) < 1:
            raise ConfigError("popsize, budget, and rs_retries must be positive")


@dataclass
class AttackOutcome:
    sample_index: int
    attack_class: ClassLabel
    algorithm: str
    original: np.ndarray
    best_candidate: np.ndarray
    best_fitness: float
    queries_used: int
    evaded: bool
    initial_score: float
    trace: tuple[tuple[int, float], ...]

    def to_json_dict(self, schema: FeatureSchema, include_trace: bool = False) -> dict:
        doc = {
            "sample_index": self.sample_index,
            "attack_class": self.attack_class.value,
            "algorithm": self.algorithm,
            "best_fitness": self.best_fitness,
            "queries_used": self.queries_used,
            "evaded": self.evaded,
            "initial_score": self.initial_score,
            "modified": {
                schema.features[j].name: self.best_candidate[j]
                for j in range(len(schema))
                if self.best_candidate[j] != self.original[j]
            },
        }
        if include_trace:
            doc["trace"] = [[q, f] for q, f in self.trace]
        return doc


def _outcome(oracle: QueryOracle, idx: int, kind: ClassLabel, algorithm: str, initial: float) -> AttackOutcome:
    return AttackOutcome(
        sample_index=idx,
        attack_class=kind,
        algorithm=algorithm,
        original=oracle.original,
        best_candidate=oracle.best_candidate,
        best_fitness=float(oracle.best_fitness),
        queries_used=oracle.queries_used,
        evaded=oracle.best_fitness == 0.0,
        initial_score=initial,
        trace=tuple(oracle.trace),
    )


# ---------------------------------------------------------------------------
# Candidate construction helpers


def _sample_candidate(
    x: np.ndarray, feasible: FeasibleSet, marginals: Marginals, rng: np.random.Generator
) -> np.ndarray:
    candidate = x.copy()
    for j in feasible.indices:
        candidate[j] = marginals.sample(j, rng)
    return candidate


def _repair(
    candidate: np.ndarray,
    compliance: ComplianceSpec,
    feasible: FeasibleSet,
    schema: FeatureSchema,
    marginals: Marginals,
    rng: np.random.Generator,
) -> np.ndarray:
    """Resample genes that violate a predicate instead of rejecting the
    candidate; rejection would waste scarce budget."""
    if check_compliant(compliance, schema, candidate):
        return candidate
    feasible_set = set(feasible.indices)
    for name, relation, value in compliance.predicates:
        pos = schema.position(name)
        if pos not in feasible_set:
            continue
        for _ in range(100):
            if check_compliant(compliance, schema, candidate):
                break
            candidate[pos] = marginals.sample(pos, rng)
    return candidate


def _clamp(value: float, domain) -> float:
    if isinstance(domain, NumericDomain):
        return domain.clamp(value)
    return value


# ---------------------------------------------------------------------------
# Optimizers


def rs_attack(
    x: np.ndarray,
    oracle: QueryOracle,
    feasible: FeasibleSet,
    marginals: Marginals,
    cfg: AttackConfig,
    rng: np.random.Generator,
) -> QueryOracle:
    """Random search: by default a single draw from the marginals."""
    for _ in range(min(cfg.rs_retries, oracle.remaining)):
        candidate = _sample_candidate(x, feasible, marginals, rng)
        candidate = _repair(candidate, oracle.compliance, feasible, oracle.schema, marginals, rng)
        if oracle.fitness(candidate) == 0.0:
            break
    return oracle


def _init_population(
    x: np.ndarray,
    oracle: QueryOracle,
    feasible: FeasibleSet,
    marginals: Marginals,
    popsize: int,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[float]]:
    pop: list[np.ndarray] = []
    fits: list[float] = []
    for _ in range(popsize):
        if oracle.remaining == 0 or oracle.best_fitness == 0.0:
            break
        candidate = _sample_candidate(x, feasible, marginals, rng)
        candidate = _repair(candidate, oracle.compliance, feasible, oracle.schema, marginals, rng)
        fits.append(oracle.fitness(candidate))
        pop.append(candidate)
    return pop, fits


def ga_de_attack(
    x: np.ndarray,
    oracle: QueryOracle,
    feasible: FeasibleSet,
    marginals: Marginals,
    cfg: AttackConfig,
    rng: np.random.Generator,
) -> QueryOracle:
    """Differential-evolution variant.

    Numeric genes mutate as a + F (b - c) clamped to the feasible domain;
    two-point crossover over the J positions mixes the mutant into the
    parent, resampling categorical genes wherever the crossover segment
    lands.  Replacement is greedy per slot.
    """
    J = list(feasible.indices)
    if not J:
        oracle.fitness(x.copy())
        return oracle
    pop, fits = _init_population(x, oracle, feasible, marginals, cfg.popsize, rng)
    while oracle.remaining > 0 and oracle.best_fitness > 0.0 and len(pop) >= 4:
        for i in range(len(pop)):
            if oracle.remaining == 0 or oracle.best_fitness == 0.0:
                break
            # best/1 base vector: differences perturb the incumbent best
            a = int(np.argmin(fits))
            others = [t for t in range(len(pop)) if t != i and t != a]
            b, c = rng.choice(others, size=2, replace=False)
            child = pop[i].copy()
            cut1, cut2 = np.sort(rng.choice(len(J) + 1, size=2, replace=False))
            for pos_idx in range(cut1, cut2):
                j = J[pos_idx]
                if oracle.schema.features[j].kind == CATEGORICAL:
                    child[j] = marginals.sample(j, rng)
                else:
                    v = pop[a][j] + cfg.diff_weight * (pop[b][j] - pop[c][j])
                    child[j] = _clamp(v, feasible.domains[j])
            child = _repair(child, oracle.compliance, feasible, oracle.schema, marginals, rng)
            f = oracle.fitness(child)
            if f <= fits[i]:
                pop[i], fits[i] = child, f
    return oracle


def ga_es_attack(
    x: np.ndarray,
    oracle: QueryOracle,
    feasible: FeasibleSet,
    marginals: Marginals,
    cfg: AttackConfig,
    rng: np.random.Generator,
) -> QueryOracle:
    """Evolution-strategy variant: (mu + lambda) with uniform two-parent
    recombination at the configured ratio, per-gene marginal resampling at
    rate 1/|J|, and elitist survivor selection."""
    J = list(feasible.indices)
    if not J:
        oracle.fitness(x.copy())
        return oracle
    mutation_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / len(J)
    pop, fits = _init_population(x, oracle, feasible, marginals, cfg.popsize, rng)
    while oracle.remaining > 0 and oracle.best_fitness > 0.0 and len(pop) >= 2:
        children: list[np.ndarray] = []
        child_fits: list[float] = []
        for _ in range(cfg.popsize):
            if oracle.remaining == 0 or oracle.best_fitness == 0.0:
                break
            if rng.random() < cfg.recombination_ratio:
                p1, p2 = rng.choice(len(pop), size=2, replace=False)
                child = pop[p1].copy()
                for j in J:
                    if rng.random() < 0.5:
                        child[j] = pop[p2][j]
            else:
                child = pop[int(rng.integers(len(pop)))].copy()
            for j in J:
                if rng.random() < mutation_rate:
                    child[j] = marginals.sample(j, rng)
            child = _repair(child, oracle.compliance, feasible, oracle.schema, marginals, rng)
            child_fits.append(oracle.fitness(child))
            children.append(child)
        if not children:
            break
        pool = pop + children
        pool_fits = fits + child_fits
        order = np.argsort(pool_fits, kind="stable")[: cfg.popsize]
        pop = [pool[i] for i in order]
        fits = [pool_fits[i] for i in order]
    return oracle


_OPTIMIZERS = {RS: rs_attack, GA_DE: ga_de_attack, GA_ES: ga_es_attack}


# ---------------------------------------------------------------------------
# Campaigns


def run_campaign(
    model,
    attack_samples: LabeledDataset,
    feasible_features: Mapping[ClassLabel, Sequence[str]] | None,
    compliance_specs: Mapping[ClassLabel, ComplianceSpec],
    cfg: AttackConfig,
    marginals_source: LabeledDataset,
    narrow: Mapping[ClassLabel, Mapping] | None = None,
) -> list[AttackOutcome]:
    """Attack every initially-detected sample with a per-sample budget.

    ``model`` only needs ``score_batch`` and ``tau``; the optimizers never
    see anything else.  Samples the detector misses are skipped: evasion is
    defined over detected samples.  Per-sample RNG streams derive from
    (seed, algorithm, sample index), so campaign order does not matter.
    """
    if any(lab is ClassLabel.NORMAL for lab in attack_samples.labels):
        raise SchemaError("campaign input must contain attack rows only")
    schema = attack_samples.schema
    if feasible_features is None:
        feasible_features = {
            kind: DEFAULT_CONTROLLABLE_FEATURES for kind in compliance_specs
        }
    feasible_sets: dict[ClassLabel, FeasibleSet] = {}
    marginals: dict[ClassLabel, Marginals] = {}
    for kind, names in feasible_features.items():
        if kind not in compliance_specs:
            raise ConfigError(f"no compliance spec for class {kind.value}")
        if not names:
            logger.warning("%s: empty feasible set, class skipped", kind.value)
            continue
        feasible_sets[kind] = build_feasible_set(
            schema, names, compliance_specs[kind], (narrow or {}).get(kind)
        )
        marginals[kind] = estimate_marginals(marginals_source, feasible_sets[kind])

    X = attack_samples.to_matrix()
    scores = model.score_batch(X)
    detected = scores > model.tau
    if not detected.any():
        logger.warning("campaign: no attack sample is initially detected")
        return []

    score_one = lambda row: float(model.score_batch(row.reshape(1, -1))[0])
    optimizer = _OPTIMIZERS[cfg.algorithm]
    outcomes: list[AttackOutcome] = []
    skipped_noncompliant = 0
    for i in range(len(attack_samples)):
        kind = attack_samples.labels[i]
        if not detected[i] or kind not in feasible_sets:
            continue
        if not check_compliant(compliance_specs[kind], schema, X[i]):
            # a sample violating its own class predicates is not a valid
            # member of the class; attacking it would be meaningless
            skipped_noncompliant += 1
            continue
        oracle = QueryOracle(
            score_fn=score_one,
            tau=model.tau,
            budget=cfg.budget,
            schema=schema,
            original=X[i],
            feasible=feasible_sets[kind],
            compliance=compliance_specs[kind],
        )
        rng = rng_for(cfg.seed, "attack", cfg.algorithm, i)
        optimizer(X[i], oracle, feasible_sets[kind], marginals[kind], cfg, rng)
        outcomes.append(_outcome(oracle, i, kind, cfg.algorithm, float(scores[i])))
    if skipped_noncompliant:
        logger.warning(
            "campaign: skipped %d samples violating their own class predicates",
            skipped_noncompliant,
        )
    return outcomes


def write_outcomes_jsonl(
    outcomes: Sequence[AttackOutcome], schema: FeatureSchema, path, include_trace: bool = False
) -> None:
    """Campaign results as JSON lines, one outcome per line."""
    with open(path, "w") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_json_dict(schema, include_trace), sort_keys=True))
            fh.write("\n")
