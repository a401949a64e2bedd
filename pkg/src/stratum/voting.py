"""Source-trained classifier ensembles and majority-vote pseudo labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.ensemble import RandomForestClassifier
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import LinearSVC

from .data import RESIDUAL, Domain
from .errors import ValidationError

ClassifierKind = Literal["nearest-neighbors", "randomized-tree-ensemble", "linear-max-margin"]


@dataclass(frozen=True)
class ClassifierConfig:
    kind: ClassifierKind
    k: int = 3
    num_trees: int = 30
    max_depth: int | None = None
    seed: int = 0
    regularization: float = 100.0

    def __post_init__(self):
        if self.kind not in ("nearest-neighbors", "randomized-tree-ensemble", "linear-max-margin"):
            raise ValidationError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.num_trees < 1:
            raise ValidationError("num_trees must be >= 1")
        if not self.regularization > 0:
            raise ValidationError("regularization must be positive")

    @classmethod
    def knn(cls, k: int = 3) -> "ClassifierConfig":
        return cls("nearest-neighbors", k=k)

    @classmethod
    def forest(cls, num_trees: int = 30, seed: int = 0, max_depth: int | None = None) -> "ClassifierConfig":
        return cls("randomized-tree-ensemble", num_trees=num_trees, seed=seed, max_depth=max_depth)

    @classmethod
    def svm(cls, regularization: float = 100.0) -> "ClassifierConfig":
        return cls("linear-max-margin", regularization=regularization)

    def with_seed(self, seed: int) -> "ClassifierConfig":
        return ClassifierConfig(self.kind, self.k, self.num_trees, self.max_depth, seed, self.regularization)

    def describe(self) -> str:
        if self.kind == "nearest-neighbors":
            return f"knn(k={self.k})"
        if self.kind == "randomized-tree-ensemble":
            return f"forest(trees={self.num_trees}, depth={self.max_depth}, seed={self.seed})"
        return f"svm(C={self.regularization})"


def default_voters(seed: int = 0) -> list[ClassifierConfig]:
    """kNN (k=3), a 30-tree forest and a linear SVM with C=100."""
    return [ClassifierConfig.knn(3), ClassifierConfig.forest(30, seed=seed), ClassifierConfig.svm(100.0)]


class _LinearOneVsRest:
    """One-vs-rest linear SVM; ties in the decision scores go to the lowest class."""

    def __init__(self, C: float, seed: int):
        self.svc = LinearSVC(C=C, dual="auto", max_iter=20000, random_state=seed)

    def fit(self, X, y):
        self.svc.fit(X, y)
        self.classes_ = self.svc.classes_
        return self

    def predict(self, X):
        scores = self.svc.decision_function(X)
        if scores.ndim == 1:
            return self.classes_[(scores > 0).astype(int)]
        return self.classes_[np.argmax(scores, axis=1)]


@dataclass
class BaseClassifier:
    config: ClassifierConfig
    model: BaseEstimator | _LinearOneVsRest = field(repr=False)

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.model.predict(np.asarray(X, dtype=np.float64)), dtype=np.int64)


def fit_classifier(X, y, config: ClassifierConfig) -> BaseClassifier:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValidationError("cannot fit a classifier on zero rows")
    single_class = np.unique(y).size < 2
    if config.kind == "nearest-neighbors":
        model = KNeighborsClassifier(n_neighbors=min(config.k, X.shape[0]), algorithm="brute")
    elif config.kind == "randomized-tree-ensemble":
        model = RandomForestClassifier(
            n_estimators=config.num_trees, max_depth=config.max_depth, random_state=config.seed
        )
    else:
        if single_class:
            raise ValidationError("a max-margin classifier needs at least two classes")
        model = _LinearOneVsRest(config.regularization, config.seed)
    model.fit(X, y)
    return BaseClassifier(config, model)


def fit_ensemble(source: Domain, configs: Sequence[ClassifierConfig]) -> list[BaseClassifier]:
    if source.labels is None:
        raise ValidationError("the ensemble is fitted on a labeled source")
    if not configs:
        raise ValidationError("at least one classifier config is required")
    return [fit_classifier(source.features, source.labels, cfg) for cfg in configs]


@dataclass(frozen=True)
class PseudoLabeling:
    candidate_indices: np.ndarray
    candidate_labels: np.ndarray
    residual_indices: np.ndarray

    def __post_init__(self):
        ci = np.asarray(self.candidate_indices, dtype=np.int64)
        cl = np.asarray(self.candidate_labels, dtype=np.int64)
        ri = np.asarray(self.residual_indices, dtype=np.int64)
        if ci.shape != cl.shape:
            raise ValidationError("one label per candidate is required")
        if np.intersect1d(ci, ri).size:
            raise ValidationError("candidates and residuals overlap")
        object.__setattr__(self, "candidate_indices", ci)
        object.__setattr__(self, "candidate_labels", cl)
        object.__setattr__(self, "residual_indices", ri)

    @property
    def n(self) -> int:
        return self.candidate_indices.size + self.residual_indices.size

    def as_vector(self) -> np.ndarray:
        """Labels in target row order, RESIDUAL for residual rows."""
        out = np.full(self.n, RESIDUAL, dtype=np.int64)
        out[self.candidate_indices] = self.candidate_labels
        return out

    @classmethod
    def from_vector(cls, labels) -> "PseudoLabeling":
        labels = np.asarray(labels, dtype=np.int64)
        cand = np.flatnonzero(labels != RESIDUAL)
        return cls(cand, labels[cand], np.flatnonzero(labels == RESIDUAL))


def vote(predictions: np.ndarray) -> np.ndarray:
    """Strict-plurality vote over the rows of ``predictions`` (classifiers x samples).

    A label wins only if it has more votes than every other label;
    otherwise the sample gets RESIDUAL.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.unique(predictions)
    counts = (predictions[:, :, None] == labels[None, None, :]).sum(axis=0)
    order = np.sort(counts, axis=1)
    top = order[:, -1]
    runner_up = order[:, -2] if labels.size > 1 else np.zeros_like(top)
    winner = labels[np.argmax(counts, axis=1)]
    return np.where(top > runner_up, winner, RESIDUAL)


def majority_vote(classifiers: Sequence[BaseClassifier], target) -> PseudoLabeling:
    X = target.features if isinstance(target, Domain) else np.asarray(target, dtype=np.float64)
    if len(classifiers) < 2:
        raise ValidationError("majority voting needs at least two classifiers")
    if X.shape[0] == 0:
        raise ValidationError("target has no rows")
    predictions = np.vstack([clf.predict(X) for clf in classifiers])
    return PseudoLabeling.from_vector(vote(predictions))


def fallback_if_empty(labeling: PseudoLabeling, best_classifier: BaseClassifier, target) -> PseudoLabeling:
    """Promote every row to a candidate labeled by ``best_classifier`` if voting produced none."""
    if labeling.candidate_indices.size:
        return labeling
    X = target.features if isinstance(target, Domain) else np.asarray(target, dtype=np.float64)
    return PseudoLabeling(np.arange(X.shape[0]), best_classifier.predict(X), np.array([], dtype=np.int64))


def pseudo_label(source: Domain, target, configs: Sequence[ClassifierConfig]) -> PseudoLabeling:
    """Fit the ensemble on ``source``, vote on ``target``, fall back to the first voter if needed."""
    classifiers = fit_ensemble(source, configs)
    if len(classifiers) == 1:
        labeling = PseudoLabeling.from_vector(
            classifiers[0].predict(target.features if isinstance(target, Domain) else target)
        )
    else:
        labeling = majority_vote(classifiers, target)
    return fallback_if_empty(labeling, classifiers[0], target)
