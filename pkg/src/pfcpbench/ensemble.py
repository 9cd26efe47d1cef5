"""Score-stacking ensembles.

Base-detector scores on the validation split are z-normalized and fed to a
binary RBF-kernel classifier trained with hinge loss.  The solver is a
dual coordinate-ascent loop with a fixed pass budget, so fits are
bit-reproducible without any external optimizer.  Base detector
parameters stay frozen; only the stacker is trained on validation, which
is the one split carrying both classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .detectors import DetectorKind, DetectorModel, _from_jsonable, _to_jsonable
from .errors import FitError, IoError, SchemaError
from .traffic import ClassLabel, LabeledDataset

SOLVER_TOL = 1e-3
SOLVER_MAX_PASSES = 100


@dataclass(frozen=True)
class EnsembleSpec:
    name: str
    base_kinds: tuple[DetectorKind, ...]
    C: float
    gamma: float

    def __post_init__(self):
        if not self.base_kinds:
            raise SchemaError("ensemble needs at least one base detector")
        if len(set(self.base_kinds)) != len(self.base_kinds):
            raise SchemaError("ensemble base kinds must be distinct")
        if self.C <= 0 or self.gamma <= 0:
            raise SchemaError("C and gamma must be positive")


PRESETS = {
    "HKAIP": EnsembleSpec(
        "HKAIP",
        (DetectorKind.HBOS, DetectorKind.KNN, DetectorKind.ABOD, DetectorKind.INNE, DetectorKind.PCA),
        C=10.0,
        gamma=10.0,
    ),
    "HKGIP": EnsembleSpec(
        "HKGIP",
        (DetectorKind.HBOS, DetectorKind.KNN, DetectorKind.GMM, DetectorKind.INNE, DetectorKind.PCA),
        C=10.0,
        gamma=10.0,
    ),
    "HKLIP": EnsembleSpec(
        "HKLIP",
        (DetectorKind.HBOS, DetectorKind.KNN, DetectorKind.LOF, DetectorKind.INNE, DetectorKind.PCA),
        C=10.0,
        gamma=10.0,
    ),
    "HKLIF": EnsembleSpec(
        "HKLIF",
        (
            DetectorKind.HBOS,
            DetectorKind.KNN,
            DetectorKind.LOF,
            DetectorKind.INNE,
            DetectorKind.FEATURE_BAGGING,
        ),
        C=100.0,
        gamma=100.0,
    ),
}


def collect_base_scores(base_models: Sequence[DetectorModel], ds: LabeledDataset) -> np.ndarray:
    """Score matrix, one column per base model in listed order."""
    X = ds.to_matrix()
    return np.column_stack([model.score_batch(X) for model in base_models])


def _rbf(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _dual_coordinate_ascent(K: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    """Box-constrained dual of the no-intercept hinge-loss kernel machine.

    Sweeps coordinates in fixed order, keeping the decision values cached.
    Coordinates stuck at a bound with a conforming gradient are shrunk out
    of the sweep; a final full pass re-checks them before convergence is
    declared.  Stops when the largest step in a pass drops below tolerance.
    """
    n = len(y)
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_i = sum_j alpha_j y_j K_ij
    diag = np.clip(np.diag(K), 1e-12, None)
    active = np.ones(n, dtype=bool)
    for sweep in range(SOLVER_MAX_PASSES):
        max_step = 0.0
        for i in np.flatnonzero(active):
            gradient = y[i] * f[i] - 1.0
            if (alpha[i] == 0.0 and gradient > SOLVER_TOL) or (
                alpha[i] == C and gradient < -SOLVER_TOL
            ):
                active[i] = False
                continue
            new_alpha = min(max(alpha[i] - gradient / diag[i], 0.0), C)
            step = new_alpha - alpha[i]
            if step != 0.0:
                f += step * y[i] * K[:, i]
                alpha[i] = new_alpha
                max_step = max(max_step, abs(step))
        if max_step < SOLVER_TOL:
            if active.all():
                break
            active[:] = True  # optimality must hold on the full set
    return alpha


@dataclass
class EnsembleModel:
    spec: EnsembleSpec
    base_models: list[DetectorModel]
    score_mean: np.ndarray
    score_sd: np.ndarray
    support_vectors: np.ndarray  # normalized base-score rows with alpha > 0
    dual_coef: np.ndarray  # alpha_i * y_i for the support rows
    bias: float = 0.0
    tau: float = 0.0  # decision threshold on the signed margin
    train_accuracy: float = field(default=0.0)

    def normalize(self, base_scores: np.ndarray) -> np.ndarray:
        return (base_scores - self.score_mean) / self.score_sd

    def margin(self, base_scores: np.ndarray) -> np.ndarray:
        Z = self.normalize(base_scores)
        return _rbf(Z, self.support_vectors, self.spec.gamma) @ self.dual_coef + self.bias

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        base = np.column_stack([m.score_batch(X) for m in self.base_models])
        return self.margin(base)

    def save(self, path: str | Path) -> None:
        doc = {
            "format": "pfcpbench-ensemble-v1",
            "name": self.spec.name,
            "base_kinds": [k.value for k in self.spec.base_kinds],
            "C": self.spec.C,
            "gamma": self.spec.gamma,
            "score_mean": self.score_mean.tolist(),
            "score_sd": self.score_sd.tolist(),
            "support_vectors": _to_jsonable(self.support_vectors),
            "dual_coef": _to_jsonable(self.dual_coef),
            "bias": self.bias,
            "tau": self.tau,
            "train_accuracy": self.train_accuracy,
            "bases": [m.to_json_dict() for m in self.base_models],
        }
        try:
            Path(path).write_text(json.dumps(doc, sort_keys=True))
        except OSError as exc:
            raise IoError(f"cannot write ensemble model to {path}: {exc}") from exc

    @staticmethod
    def load(path: str | Path) -> "EnsembleModel":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read ensemble model from {path}: {exc}") from exc
        if doc.get("format") != "pfcpbench-ensemble-v1":
            raise SchemaError(f"{path}: not an ensemble model container")
        spec = EnsembleSpec(
            name=doc["name"],
            base_kinds=tuple(DetectorKind.parse(k) for k in doc["base_kinds"]),
            C=float(doc["C"]),
            gamma=float(doc["gamma"]),
        )
        bases = [DetectorModel.from_json_dict(b) for b in doc["bases"]]
        return EnsembleModel(
            spec=spec,
            base_models=bases,
            score_mean=np.array(doc["score_mean"], dtype=float),
            score_sd=np.array(doc["score_sd"], dtype=float),
            support_vectors=_from_jsonable(doc["support_vectors"]),
            dual_coef=_from_jsonable(doc["dual_coef"]),
            bias=float(doc["bias"]),
            tau=float(doc["tau"]),
            train_accuracy=float(doc["train_accuracy"]),
        )


def fit_ensemble(
    spec: EnsembleSpec,
    base_models: Sequence[DetectorModel],
    validation: LabeledDataset,
    seed: int = 42,
) -> EnsembleModel:
    """Train the stacking classifier on validation base scores.

    Requires both classes in the validation split: a hinge-loss binary
    classifier cannot be trained on one class.
    """
    if len(base_models) != len(spec.base_kinds) or any(
        m.kind is not k for m, k in zip(base_models, spec.base_kinds)
    ):
        raise SchemaError("base models must match the spec kinds in order")
    y_bool = np.array([lab is not ClassLabel.NORMAL for lab in validation.labels], dtype=bool)
    if not y_bool.any() or y_bool.all():
        raise FitError(
            "ensemble stacking needs both benign and attack rows in validation"
        )
    S = collect_base_scores(base_models, validation)
    mean = S.mean(axis=0)
    sd = np.maximum(S.std(axis=0), 1e-12)
    Z = (S - mean) / sd
    y = np.where(y_bool, 1.0, -1.0)
    K = _rbf(Z, Z, spec.gamma)
    alpha = _dual_coordinate_ascent(K, y, spec.C)
    support = alpha > 0
    model = EnsembleModel(
        spec=spec,
        base_models=list(base_models),
        score_mean=mean,
        score_sd=sd,
        support_vectors=Z[support],
        dual_coef=(alpha * y)[support],
    )
    margins = model.margin(S)
    model.train_accuracy = float(((margins > 0) == y_bool).mean())
    return model


def ensemble_score(model: EnsembleModel, base_scores: np.ndarray) -> np.ndarray:
    """Signed margin on already-collected base scores."""
    return model.margin(np.atleast_2d(base_scores))


def ensemble_decide(model: EnsembleModel, base_scores: np.ndarray) -> np.ndarray:
    """Anomalous iff the margin strictly exceeds the ensemble threshold."""
    return ensemble_score(model, base_scores) > model.tau
