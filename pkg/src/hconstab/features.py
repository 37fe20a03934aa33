"""Dense feature matrices and the column normalization used by the bounds.

Column-normalizing a feature matrix caps its spectral norm at the square
root of the number of columns, which is what makes the generalization
bound independent of the graph size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError, NonFiniteEntryError
from .hypergraph import DEFAULT_MAX_ITER, DEFAULT_TOL


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense real feature matrix with a column-normalization flag."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2:
            raise NonFiniteEntryError(f"expected 2-d array, got ndim={arr.ndim}")
        if not np.isfinite(arr).all():
            raise NonFiniteEntryError("feature matrix has non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def column_normalize(x: FeatureMatrix) -> FeatureMatrix:
    """Scale every nonzero column to unit Euclidean norm.

    All-zero columns stay zero rather than being dropped, so the column
    count (and with it the worst-case spectral bound sqrt(cols)) is
    preserved. Idempotent.
    """
    norms = np.linalg.norm(x.data, axis=0)
    scale = np.where(norms > 0.0, norms, 1.0)
    return FeatureMatrix(data=x.data / scale, normalized=True)


def spectral_norm_dense(
    x: FeatureMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Largest singular value via power iteration on the X^T X Gram matrix.

    Deterministic all-ones start; same convergence rule as the sparse
    version (change in the square-root Rayleigh quotient <= tol).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gram = x.data.T @ x.data
    dim = x.cols
    v = np.ones(dim) / np.sqrt(dim)
    mu_prev = None
    for sweep in range(max_iter):
        w = gram @ v
        rayleigh = float(v @ w)
        mu = np.sqrt(max(rayleigh, 0.0))
        if mu_prev is not None and abs(mu - mu_prev) <= tol:
            return mu
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        mu_prev = mu
    raise NoConvergenceError(mu_prev, max_iter)
