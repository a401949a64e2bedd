"""Kernels, centering matrices and (stratified) maximum mean discrepancy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .data import Domain
from .errors import NoCommonClassError, ValidationError

MEDIAN_HEURISTIC = "median-heuristic"


class ClassMismatchWarning(UserWarning):
    """A class present in only one domain was left out of a stratified quantity."""


@dataclass(frozen=True)
class KernelSpec:
    kind: Literal["linear", "rbf"] = "rbf"
    bandwidth: Union[float, str] = MEDIAN_HEURISTIC

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN_HEURISTIC:
                raise ValidationError(f"bandwidth must be a positive number or {MEDIAN_HEURISTIC!r}")
        elif not float(self.bandwidth) > 0:
            raise ValidationError("bandwidth must be positive")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear", 1.0)

    @classmethod
    def rbf(cls, bandwidth: Union[float, str] = MEDIAN_HEURISTIC) -> "KernelSpec":
        return cls("rbf", bandwidth)

    def resolve(self, X: np.ndarray) -> "KernelSpec":
        """Fix a median-heuristic bandwidth using the rows of ``X``."""
        if self.kind == "rbf" and self.bandwidth == MEDIAN_HEURISTIC:
            return KernelSpec("rbf", median_heuristic(X))
        return self

    def __str__(self):
        if self.kind == "linear":
            return "linear"
        return f"rbf({self.bandwidth})"


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    block_sizes: tuple[int, int]
    spec: KernelSpec

    @property
    def source_block(self) -> np.ndarray:
        n_s = self.block_sizes[0]
        return self.values[:n_s, :n_s]


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def median_heuristic(X) -> float:
    """Median of the non-zero pairwise Euclidean distances among rows of X."""
    d = pdist(_as_matrix(X))
    d = d[d > 0]
    if d.size == 0:
        raise ValidationError("median heuristic undefined: all points are identical")
    return float(np.median(d))


def kernel_value(a, b, spec: KernelSpec) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.size} vs {b.size}")
    if spec.kind == "linear":
        return float(a @ b)
    if spec.bandwidth == MEDIAN_HEURISTIC:
        raise ValidationError("a single kernel value needs a numeric bandwidth")
    diff = a - b
    return float(np.exp(-(diff @ diff) / (2.0 * float(spec.bandwidth) ** 2)))


def gram(X, Y, spec: KernelSpec) -> np.ndarray:
    """Cross-kernel block k(X_i, Y_j); the bandwidth must already be resolved."""
    X, Y = _as_matrix(X), _as_matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind == "linear":
        return X @ Y.T
    if spec.bandwidth == MEDIAN_HEURISTIC:
        raise ValidationError("resolve the median-heuristic bandwidth before building a Gram block")
    sq = cdist(X, Y, "sqeuclidean")
    return np.exp(-sq / (2.0 * float(spec.bandwidth) ** 2))


def kernel_matrix(source, target, spec: KernelSpec) -> KernelMatrix:
    """Kernel over the stacked rows ``[source; target]``, symmetrized."""
    S, T = _as_matrix(source), _as_matrix(target)
    if S.shape[1] != T.shape[1]:
        raise ValidationError(f"dimension mismatch: {S.shape[1]} vs {T.shape[1]}")
    X = np.vstack([S, T])
    spec = spec.resolve(X)
    K = gram(X, X, spec)
    K = 0.5 * (K + K.T)
    if spec.kind == "rbf":
        np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, (S.shape[0], T.shape[0]), spec)


def centering_matrix(n: int) -> np.ndarray:
    if n < 1:
        raise ValidationError("centering matrix needs n >= 1")
    return np.eye(n) - np.full((n, n), 1.0 / n)


def mmd_global(source, target, spec: KernelSpec) -> float:
    """Biased squared MMD between two samples (clamped at zero)."""
    S, T = _as_matrix(source), _as_matrix(target)
    if S.shape[0] == 0 or T.shape[0] == 0:
        raise ValidationError("MMD needs non-empty samples")
    if S.shape[1] != T.shape[1]:
        raise ValidationError(f"dimension mismatch: {S.shape[1]} vs {T.shape[1]}")
    spec = spec.resolve(np.vstack([S, T]))
    if spec.kind == "linear":
        diff = S.mean(axis=0) - T.mean(axis=0)
        return float(max(diff @ diff, 0.0))
    value = gram(S, S, spec).mean() + gram(T, T, spec).mean() - 2.0 * gram(S, T, spec).mean()
    return float(max(value, 0.0))


def common_classes(source_labels, target_labels, warn: bool = True) -> list[int]:
    s = set(np.unique(source_labels).tolist())
    t = set(np.unique(target_labels).tolist())
    shared = sorted(s & t)
    only = sorted(s ^ t)
    if warn and only and shared:
        warnings.warn(f"classes {only} present in only one domain were skipped", ClassMismatchWarning, stacklevel=3)
    return [int(c) for c in shared]


def class_mmds(source: Domain, target: Domain, spec: KernelSpec) -> dict[int, float]:
    """Per-class squared MMD over the classes both domains contain.

    A median-heuristic bandwidth is fixed once over all rows of both domains
    so every class is measured with the same kernel.
    """
    if source.labels is None or target.labels is None:
        raise ValidationError("stratified MMD needs labels (or pseudo labels) on both domains")
    if source.dim != target.dim:
        raise ValidationError(f"dimension mismatch: {source.dim} vs {target.dim}")
    shared = common_classes(source.labels, target.labels)
    if not shared:
        raise NoCommonClassError("the domains share no class")
    spec = spec.resolve(np.vstack([source.features, target.features]))
    return {
        c: mmd_global(source.features[source.labels == c], target.features[target.labels == c], spec)
        for c in shared
    }


def mmd_stratified(source: Domain, target: Domain, spec: KernelSpec, reduction: str = "mean") -> float:
    """Class-wise MMD averaged (``mean``) or summed (``sum``) over shared classes."""
    per_class = class_mmds(source, target, spec)
    total = sum(per_class.values())
    if reduction == "sum":
        return float(total)
    if reduction != "mean":
        raise ValidationError(f"unknown reduction {reduction!r}")
    return float(total / len(per_class))


def standardize(reference, *others, eps: float = 1e-12):
    """Z-score columns with ``reference`` statistics; constant columns are only centered."""
    ref = _as_matrix(reference)
    mu = ref.mean(axis=0)
    sd = ref.std(axis=0)
    sd = np.where(sd > eps, sd, 1.0)
    out = [(ref - mu) / sd] + [(_as_matrix(o) - mu) / sd for o in others]
    return out if others else out[0]


def standardize_domains(reference: Domain, *others: Domain) -> list[Domain]:
    mats = standardize(reference.features, *(o.features for o in others))
    if not others:
        mats = [mats]
    return [
        Domain(X, d.labels, d.position_id, d.dataset_id)
        for X, d in zip(mats, (reference, *others))
    ]
