"""Intra-class kernel transfer with iterative pseudo-label refinement.

The transform ``W`` minimizes the summed per-class MMD between source rows
and target candidates in a kernel-induced subspace,

    min_W  sum_c tr(W' K L_c K W) + lam * tr(W' W)   s.t.  W' K H K W = I,

which reduces to the generalized symmetric eigenproblem
``(K (sum_c L_c) K + lam I) w = mu (K H K) w``; ``W`` holds the eigenvectors of
the ``m`` smallest eigenvalues.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .data import RESIDUAL, Domain
from .errors import IllConditionedError, NoCommonClassError, ValidationError
from .kernels import ClassMismatchWarning, KernelSpec, common_classes, gram, kernel_matrix, standardize_domains
from .voting import ClassifierConfig, PseudoLabeling, default_voters, fit_classifier, pseudo_label

log = logging.getLogger(__name__)

BASE_JITTER = 1e-9
MAX_JITTER_STEPS = 7
MIN_CONSTRAINT_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class SatConfig:
    num_dims: int = 30
    lam: float = 1.0
    kernel: KernelSpec = KernelSpec.linear()
    max_iterations: int = 10
    convergence_fraction: float = 0.01
    annotator: ClassifierConfig = ClassifierConfig.knn(1)
    standardize: bool = True

    def __post_init__(self):
        if self.num_dims < 1:
            raise ValidationError("num_dims must be >= 1")
        if not self.lam >= 0:
            raise ValidationError("lam must be non-negative")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0.0 <= self.convergence_fraction <= 1.0:
            raise ValidationError("convergence_fraction must be in [0, 1]")


@dataclass(frozen=True)
class TransferModel:
    """Result of one eigen-solve.

    ``A`` and ``B`` are the matrices actually solved (``B`` includes the
    jitter), so ``A @ W == B @ W * eigenvalues`` and ``W' B W == I``.
    """

    W: np.ndarray
    eigenvalues: np.ndarray
    kernel: KernelSpec
    train_rows: np.ndarray
    n_source: int
    class_ids: tuple[int, ...]
    K: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def num_dims(self) -> int:
        return self.W.shape[1]

    def train_embedding(self) -> np.ndarray:
        """Rows of ``[W' K]'`` for the training rows (source first)."""
        return self.K @ self.W

    def embed(self, rows) -> np.ndarray:
        return embed(self, rows)


def class_indicator(labels_source, labels_candidates, c: int) -> np.ndarray:
    """Vector v with L_c = v v': +1/n_s^c on source-c rows, -1/n_t^c on candidate-c rows."""
    ys = np.asarray(labels_source)
    yt = np.asarray(labels_candidates)
    in_s = ys == c
    in_t = yt == c
    ns, nt = int(in_s.sum()), int(in_t.sum())
    if ns == 0 or nt == 0:
        raise ValidationError(f"class {c} is missing from the {'source' if ns == 0 else 'candidates'}")
    return np.concatenate([in_s / ns, in_t / -nt])


def build_intra_class_mmd(labels_source, labels_candidates, c: int) -> np.ndarray:
    v = class_indicator(labels_source, labels_candidates, c)
    return np.outer(v, v)


def _constraint_factor(B: np.ndarray) -> tuple[np.ndarray, float]:
    """Add the smallest jitter from the escalation path that makes B safely positive definite."""
    n = B.shape[0]
    scale = max(1.0, float(np.trace(B)) / n)
    lowest = float(scipy.linalg.eigvalsh(B, subset_by_index=[0, 0])[0])
    tried = []
    for step in range(MAX_JITTER_STEPS):
        jitter = BASE_JITTER * scale * 10.0**step
        tried.append(jitter)
        if lowest + jitter < MIN_CONSTRAINT_EIGENVALUE:
            continue
        Bj = B + jitter * np.eye(n)
        try:
            scipy.linalg.cholesky(Bj, lower=True)
        except np.linalg.LinAlgError:
            continue
        if step:
            log.debug("constraint matrix needed jitter %.3g", jitter)
        return Bj, jitter
    path = ", ".join(f"{j:.1e}" for j in tried)
    raise IllConditionedError(
        f"K H K stays singular (smallest eigenvalue {lowest:.3e}) along jitter path [{path}]"
    )


def _fix_signs(W: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def _smallest_pairs(A, Bj, KV, lam, m):
    """The m smallest pairs of A w = mu Bj w, normalized so that W' Bj W = I.

    When lam > 0, A = lam I + KV KV' is positive definite and usually far
    better conditioned than Bj, so the flipped problem Bj w = nu A w is
    solved instead (nu = 1 / mu, largest nu first) and rescaled.
    """
    n = A.shape[0]
    if lam > 0:
        cond_a = 1.0 + np.linalg.norm(KV, 2) ** 2 / lam
        lowest = float(scipy.linalg.eigvalsh(Bj, subset_by_index=[0, 0])[0])
        if cond_a <= float(np.trace(Bj)) / lowest:
            nu, V = scipy.linalg.eigh(Bj, A, subset_by_index=[n - m, n - 1])
            nu, V = nu[::-1], V[:, ::-1]
            return 1.0 / nu, V / np.sqrt(nu)
    return scipy.linalg.eigh(A, Bj, subset_by_index=[0, m - 1])


def solve_with_vectors(
    source_rows: np.ndarray,
    target_rows: np.ndarray,
    vectors: np.ndarray,
    cfg: SatConfig,
    class_ids: Sequence[int] = (),
) -> TransferModel:
    """Solve the eigenproblem for ``sum_c L_c = V V'`` given the columns of V."""
    km = kernel_matrix(source_rows, target_rows, cfg.kernel)
    K = km.values
    n = K.shape[0]
    m = cfg.num_dims
    if m > n - 1:
        raise ValidationError(f"num_dims={m} exceeds n_source + n_candidates - 1 = {n - 1}")
    KV = K @ vectors
    A = KV @ KV.T + cfg.lam * np.eye(n)
    A = 0.5 * (A + A.T)
    HK = K - K.mean(axis=0, keepdims=True)
    B = HK.T @ HK
    B = 0.5 * (B + B.T)
    Bj, jitter = _constraint_factor(B)
    mu, W = _smallest_pairs(A, Bj, KV, cfg.lam, m)
    W = _fix_signs(W)
    return TransferModel(
        W=W,
        eigenvalues=mu,
        kernel=km.spec,
        train_rows=np.vstack([source_rows, target_rows]),
        n_source=km.block_sizes[0],
        class_ids=tuple(int(c) for c in class_ids),
        K=K,
        A=A,
        B=Bj,
        jitter=jitter,
    )


def stratified_vectors(labels_source, labels_candidates, warn: bool = True) -> tuple[np.ndarray, list[int]]:
    classes = common_classes(labels_source, labels_candidates, warn=False)
    if not classes:
        raise NoCommonClassError("source and candidates share no class")
    skipped = sorted(set(np.unique(labels_source).tolist()) - set(classes))
    if warn and skipped:
        warnings.warn(f"classes {skipped} have no candidates and were left out", ClassMismatchWarning, stacklevel=3)
    V = np.column_stack([class_indicator(labels_source, labels_candidates, c) for c in classes])
    return V, classes


def solve_transform(source: Domain, candidates: Domain, cfg: SatConfig = SatConfig()) -> TransferModel:
    """Fit W from a labeled source and pseudo-labeled candidates."""
    if source.labels is None or candidates.labels is None:
        raise ValidationError("solve_transform needs source labels and candidate pseudo labels")
    if source.dim != candidates.dim:
        raise ValidationError(f"dimension mismatch: {source.dim} vs {candidates.dim}")
    V, classes = stratified_vectors(source.labels, candidates.labels)
    return solve_with_vectors(source.features, candidates.features, V, cfg, classes)


def intra_class_objective(K: np.ndarray, labels_source, labels_candidates) -> float:
    """sum_c tr(K L_c) over shared classes."""
    V, _ = stratified_vectors(labels_source, labels_candidates, warn=False)
    return float(np.einsum("ic,ij,jc->", V, K, V))


def embed(model: TransferModel, rows) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != model.train_rows.shape[1]:
        raise ValidationError(f"dimension mismatch: {rows.shape[1]} vs {model.train_rows.shape[1]}")
    return gram(rows, model.train_rows, model.kernel) @ model.W


def _predict_or_constant(X_train, y_train, X_apply, config: ClassifierConfig) -> np.ndarray:
    classes = np.unique(y_train)
    if classes.size == 1:
        return np.full(X_apply.shape[0], classes[0], dtype=np.int64)
    return fit_classifier(X_train, y_train, config).predict(X_apply)


def second_annotation(
    model: TransferModel,
    source: Domain,
    candidates: Domain,
    residual_rows,
    annotator: ClassifierConfig = ClassifierConfig.knn(1),
) -> tuple[np.ndarray, np.ndarray]:
    """Relabel candidates in the learned subspace, then residuals from the candidates.

    Residual rows are labeled in the original feature space because they
    never enter the kernel matrix.
    """
    if candidates.n == 0:
        raise ValidationError("second annotation needs at least one candidate")
    Z = model.train_embedding()
    ns = model.n_source
    y_can = _predict_or_constant(Z[:ns], source.labels, Z[ns:], annotator)
    residual_rows = np.asarray(residual_rows, dtype=np.float64).reshape(-1, source.dim)
    if residual_rows.shape[0] == 0:
        return y_can, np.array([], dtype=np.int64)
    y_res = _predict_or_constant(candidates.features, y_can, residual_rows, annotator)
    return y_can, y_res


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    labels_changed: int
    objective: float
    accuracy: float | None = None


@dataclass(frozen=True)
class SatResult:
    labels: np.ndarray
    trace: tuple[IterationRecord, ...]
    initial_labeling: PseudoLabeling
    model: TransferModel = field(repr=False)

    @property
    def converged(self) -> bool:
        return len(self.trace) > 0 and self.trace[-1].labels_changed == 0

    def trace_rows(self) -> list[dict]:
        return [
            {
                "iteration": r.iteration,
                "labels_changed": r.labels_changed,
                "objective": r.objective,
                "accuracy": "" if r.accuracy is None else r.accuracy,
            }
            for r in self.trace
        ]


def run_sat(
    source: Domain,
    target: Domain,
    voting_configs: Sequence[ClassifierConfig] | None = None,
    cfg: SatConfig = SatConfig(),
    truth=None,
) -> SatResult:
    """Label every target row by iterated intra-class transfer.

    Majority voting seeds the first round only; later rounds rebuild the
    kernel and class matrices from the previous candidate labels. The
    candidate/residual split is fixed after voting. ``truth`` (optional) is
    used only to fill the per-iteration accuracy in the trace.
    """
    if source.labels is None:
        raise ValidationError("the source domain must be labeled")
    if source.dim != target.dim:
        raise ValidationError(f"dimension mismatch: {source.dim} vs {target.dim}")
    voting_configs = default_voters() if voting_configs is None else voting_configs
    src, tgt = (
        standardize_domains(source, target.unlabeled()) if cfg.standardize else (source, target.unlabeled())
    )
    labeling = pseudo_label(src, tgt, voting_configs)
    cand_idx = labeling.candidate_indices
    res_idx = labeling.residual_indices
    X_can = tgt.features[cand_idx]
    X_res = tgt.features[res_idx]
    truth = None if truth is None else np.asarray(truth)

    current = labeling.candidate_labels
    trace = []
    labels = None
    model = None
    for it in range(1, cfg.max_iterations + 1):
        candidates = Domain(X_can, current)
        model = solve_transform(src, candidates, cfg)
        objective = intra_class_objective(model.K, src.labels, current)
        y_can, y_res = second_annotation(model, src, candidates, X_res, cfg.annotator)
        changed = int(np.count_nonzero(y_can != current))
        labels = np.full(tgt.n, RESIDUAL, dtype=np.int64)
        labels[cand_idx] = y_can
        labels[res_idx] = y_res
        acc = None if truth is None else float(np.mean(labels == truth))
        trace.append(IterationRecord(it, changed, objective, acc))
        log.debug("iteration %d: %d candidate labels changed, objective %.6g", it, changed, objective)
        current = y_can
        if changed / cand_idx.size < cfg.convergence_fraction:
            break
    return SatResult(labels, tuple(trace), labeling, model)
