"""Source-domain selection by stratified (class-wise) or global MMD."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Domain
from .errors import NoCommonClassError, ValidationError
from .kernels import KernelSpec, mmd_global, mmd_stratified, standardize_domains
from .voting import ClassifierConfig, default_voters, fit_classifier, pseudo_label


class UnreachableSourceWarning(UserWarning):
    """A source shares no pseudo class with the target and was ranked at +inf."""


@dataclass(frozen=True)
class SourceRanking:
    selected: int
    distances: tuple[float, ...]

    @property
    def order(self) -> list[int]:
        return _ranked(self.distances)


def _ranked(distances: Sequence[float]) -> list[int]:
    # stable sort, so equal distances keep the lower index first
    return sorted(range(len(distances)), key=lambda i: distances[i])


def _check(sources: Sequence[Domain], target: Domain) -> None:
    if not sources:
        raise ValidationError("at least one source domain is required")
    for i, s in enumerate(sources):
        if s.dim != target.dim:
            raise ValidationError(f"source {i} has dimension {s.dim}, target has {target.dim}")


def _pair(source: Domain, target: Domain, standardize: bool) -> tuple[Domain, Domain]:
    if standardize:
        s, t = standardize_domains(source, target)
        return s, t
    return source, target


def stratified_distance(
    source: Domain,
    target: Domain,
    voting_configs: Sequence[ClassifierConfig] | None = None,
    spec: KernelSpec = KernelSpec.rbf(),
    standardize: bool = True,
) -> float:
    """SD between a labeled source and the candidates it pseudo-labels on ``target``."""
    if source.labels is None:
        raise ValidationError("source domains must be labeled")
    voting_configs = default_voters() if voting_configs is None else voting_configs
    s, t = _pair(source, target.unlabeled(), standardize)
    labeling = pseudo_label(s, t, voting_configs)
    candidates = Domain(t.features[labeling.candidate_indices], labeling.candidate_labels)
    return mmd_stratified(s, candidates, spec)


def select_source(
    sources: Sequence[Domain],
    target: Domain,
    voting_configs: Sequence[ClassifierConfig] | None = None,
    spec: KernelSpec = KernelSpec.rbf(),
    standardize: bool = True,
) -> SourceRanking:
    """Pick the source with the smallest stratified distance to ``target``.

    Voting is re-fitted on each source, so each source is compared with the
    candidates it induces. Ties go to the lowest index.
    """
    _check(sources, target)
    distances = []
    for i, source in enumerate(sources):
        try:
            distances.append(stratified_distance(source, target, voting_configs, spec, standardize))
        except NoCommonClassError:
            warnings.warn(f"source {i} shares no class with its candidates", UnreachableSourceWarning, stacklevel=2)
            distances.append(math.inf)
    if all(math.isinf(d) for d in distances):
        raise NoCommonClassError("no source shares a class with its pseudo-labeled target")
    return SourceRanking(_ranked(distances)[0], tuple(distances))


def rank_sources_global(
    sources: Sequence[Domain],
    target: Domain,
    spec: KernelSpec = KernelSpec.rbf(),
    standardize: bool = True,
) -> SourceRanking:
    """Global-distance baseline: MMD between whole domains, labels ignored."""
    _check(sources, target)
    distances = []
    for source in sources:
        s, t = _pair(source, target, standardize)
        distances.append(mmd_global(s.features, t.features, spec))
    return SourceRanking(_ranked(distances)[0], tuple(distances))


def transfer_accuracies(
    sources: Sequence[Domain],
    target: Domain,
    classifier: ClassifierConfig = ClassifierConfig.svm(1.0),
    standardize: bool = True,
) -> list[float]:
    """Accuracy on the labeled ``target`` of a classifier trained on each source.

    This is the evaluation protocol for selection: the most accurate source
    is taken as the right answer.
    """
    _check(sources, target)
    if target.labels is None:
        raise ValidationError("ground-truth selection needs target labels")
    accs = []
    for source in sources:
        s, t = _pair(source, target, standardize)
        pred = fit_classifier(s.features, s.labels, classifier).predict(t.features)
        accs.append(float(np.mean(pred == t.labels)))
    return accs


def ground_truth_source(sources, target, classifier=ClassifierConfig.svm(1.0), standardize=True) -> int:
    accs = transfer_accuracies(sources, target, classifier, standardize)
    return int(np.argmax(accs))
