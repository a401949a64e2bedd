"""End-to-end comparison runs and their JSON/CSV reports."""

from __future__ import annotations

import csv
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .baselines import pca_transform, tca_transform
from .data import Domain
from .errors import ValidationError
from .kernels import standardize_domains
from .metrics import accuracy, confusion_matrix, f1_macro
from .sat import SatConfig, run_sat
from .voting import ClassifierConfig, default_voters, fit_classifier

METHODS = ("source-only-1nn", "pca", "tca", "stl-sat")
AGGREGATE_COLUMNS = ("task", "method", "accuracy", "f1", "seed", "wall_time")


@dataclass(frozen=True)
class ExperimentReport:
    task_id: str
    method: str
    accuracy: float
    f1_macro: float
    confusion: list[list[int]]
    classes: list[int]
    seed: int
    wall_time: float
    f1_averaging: str = "macro"

    def __post_init__(self):
        total = sum(map(sum, self.confusion))
        if total and abs(sum(self.confusion[i][i] for i in range(len(self.classes))) / total - self.accuracy) > 1e-12:
            raise ValidationError("accuracy disagrees with the confusion matrix")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls(**json.loads(text))

    def aggregate_row(self) -> dict:
        return {
            "task": self.task_id,
            "method": self.method,
            "accuracy": repr(self.accuracy),
            "f1": repr(self.f1_macro),
            "seed": self.seed,
            "wall_time": repr(self.wall_time),
        }


def atomic_write(path, text: str) -> None:
    """Write through a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_aggregate(path, report: ExperimentReport) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        if new:
            w.writeheader()
        w.writerow(report.aggregate_row())


def final_classifier(seed: int) -> ClassifierConfig:
    """Downstream learner shared by the dimensionality-reduction baselines."""
    return ClassifierConfig.forest(30, seed=seed)


def predict_with(
    method: str,
    source: Domain,
    target: Domain,
    cfg: SatConfig = SatConfig(),
    seed: int = 0,
) -> np.ndarray:
    """Target predictions of one method; target labels are never read."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    if source.labels is None:
        raise ValidationError("the source domain must be labeled")
    unlabeled = target.unlabeled()
    if method == "stl-sat":
        return run_sat(source, unlabeled, default_voters(seed), cfg).labels
    if cfg.standardize:
        src, tgt = standardize_domains(source, unlabeled)
    else:
        src, tgt = source, unlabeled
    if method == "source-only-1nn":
        return fit_classifier(src.features, src.labels, ClassifierConfig.knn(1)).predict(tgt.features)
    if method == "pca":
        union = np.vstack([src.features, tgt.features])
        m = min(cfg.num_dims, src.dim)
        Zs = pca_transform(union, src.features, m)
        Zt = pca_transform(union, tgt.features, m)
    else:
        model = tca_transform(src.features, tgt.features, cfg)
        Z = model.train_embedding()
        Zs, Zt = Z[: src.n], Z[src.n :]
    return fit_classifier(Zs, src.labels, final_classifier(seed)).predict(Zt)


def run_experiment(
    source: Domain,
    target: Domain,
    method: str,
    cfg: SatConfig = SatConfig(),
    seed: int = 0,
    task_id: str = "",
    timing: bool = True,
) -> ExperimentReport:
    """Run ``method`` on (source, target) and score it with the target labels.

    With ``timing=False`` the wall time is recorded as 0 so reports of
    identical runs are byte-identical.
    """
    if target.labels is None:
        raise ValidationError("the target needs labels for scoring")
    start = time.perf_counter()
    predicted = predict_with(method, source, target, cfg, seed)
    elapsed = time.perf_counter() - start
    classes = np.union1d(np.union1d(source.labels, target.labels), predicted)
    M, classes = confusion_matrix(target.labels, predicted, classes)
    return ExperimentReport(
        task_id=task_id or f"{source.position_id or 'source'}->{target.position_id or 'target'}",
        method=method,
        accuracy=accuracy(target.labels, predicted),
        f1_macro=f1_macro(target.labels, predicted),
        confusion=M.tolist(),
        classes=classes,
        seed=int(seed),
        wall_time=round(elapsed, 6) if timing else 0.0,
    )

