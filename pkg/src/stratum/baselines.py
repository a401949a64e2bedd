"""PCA and TCA comparison transforms."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .sat import SatConfig, TransferModel, _fix_signs, solve_with_vectors


def pca_transform(fit_rows, apply_rows, m: int) -> np.ndarray:
    """Project ``apply_rows`` on the top-``m`` principal directions of ``fit_rows``."""
    F = np.asarray(fit_rows, dtype=np.float64)
    Xa = np.asarray(apply_rows, dtype=np.float64)
    if F.shape[1] != Xa.shape[1]:
        raise ValidationError(f"dimension mismatch: {F.shape[1]} vs {Xa.shape[1]}")
    if not 1 <= m <= F.shape[1]:
        raise ValidationError(f"m={m} must be in 1..{F.shape[1]}")
    mu = F.mean(axis=0)
    # right singular vectors come out in descending singular-value order
    _, _, Vt = np.linalg.svd(F - mu, full_matrices=False)
    components = np.zeros((F.shape[1], m))
    k = min(m, Vt.shape[0])
    components[:, :k] = Vt[:k].T
    if k < m:
        # fewer rows than dims: complete the basis so the result stays orthogonal
        q, _ = np.linalg.qr(np.hstack([components[:, :k], np.eye(F.shape[1])]))
        components[:, k:] = q[:, k:m]
    return (Xa - mu) @ _fix_signs(components)


def tca_transform(source, target, cfg: SatConfig = SatConfig()) -> TransferModel:
    """Transfer component analysis: the same eigenproblem with one global class."""
    S = np.asarray(source, dtype=np.float64)
    T = np.asarray(target, dtype=np.float64)
    if S.shape[0] == 0 or T.shape[0] == 0:
        raise ValidationError("TCA needs non-empty source and target")
    v = np.concatenate([np.full(S.shape[0], 1.0 / S.shape[0]), np.full(T.shape[0], -1.0 / T.shape[0])])
    return solve_with_vectors(S, T, v[:, None], cfg, class_ids=())
