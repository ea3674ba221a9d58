"""Variety curation: keep the items that move most in reduced space.

The chain is: sample covariance of the embedding matrix, eigenvalue
decomposition, projection onto the top-k eigenvectors, per-row variance
of the reduced coordinates, then selection of the highest-scoring
fraction. Row variance rewards items whose reduced coordinates swing
across principal directions, which picks out unusual items without any
prior knowledge of cluster counts.

Numerical contract (what tests pin down):

- covariance uses the n-1 normalization and is symmetrized exactly;
- each returned eigenpair satisfies ``||C v - lam v|| <= tol * max(1, ||C||_F)``;
- eigenvalues come back descending, eigenvectors column-orthonormal with
  a deterministic sign (largest-magnitude component positive, ties
  broken by lowest index);
- the sample variance of reduced column i equals eigenvalue i;
- selection size is always ``ceil(fraction * n)``, ties broken by
  ascending id.

Any solver meeting the residual bound is acceptable; this implementation
delegates to LAPACK's symmetric eigensolver via numpy and verifies the
bound on the way out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gateway import EmbeddingMatrix
from .records import Dataset


@dataclass(frozen=True)
class VarietyConfig:
    """Reduced dimension, keep fraction, and the eigen residual bound."""

    reduced_dim: int = 32
    keep_fraction: float = 0.20
    eigen_tolerance: float = 1e-10
    whiten: bool = False

    def __post_init__(self) -> None:
        if self.reduced_dim < 2:
            raise ValueError("reduced_dim must be >= 2")
        if not (0.0 < self.keep_fraction <= 1.0):
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.eigen_tolerance <= 0:
            raise ValueError("eigen_tolerance must be positive")


@dataclass(frozen=True)
class EigenPair:
    """Top-k eigenvalues (descending) and column-orthonormal eigenvectors."""

    eigenvalues: np.ndarray  # shape (k,)
    eigenvectors: np.ndarray  # shape (d, k)

    def __post_init__(self) -> None:
        if self.eigenvalues.ndim != 1 or self.eigenvectors.ndim != 2:
            raise ValueError("eigenvalues must be 1-d, eigenvectors 2-d")
        if self.eigenvectors.shape[1] != self.eigenvalues.shape[0]:
            raise ValueError("one eigenvector column per eigenvalue")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be sorted descending")

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class ReducedFeatures:
    """n x k projected coordinates aligned with the source row ids."""

    row_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("reduced values must be a 2-d matrix")
        if len(self.row_ids) != self.values.shape[0]:
            raise ValueError("row_ids must align with rows")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("reduced values must be finite")

    @property
    def dims(self) -> int:
        return self.values.shape[1]


def _as_array(X) -> np.ndarray:
    if isinstance(X, EmbeddingMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def covariance(X) -> np.ndarray:
    """Mean-centered sample covariance, ``Xc.T @ Xc / (n - 1)``.

    Accepts an :class:`EmbeddingMatrix` or a plain (n, d) array; needs
    at least two rows. The result is explicitly symmetrized so later
    stages never see rounding skew.
    """
    values = _as_array(X)
    if values.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    n = values.shape[0]
    if n < 2:
        raise ValueError(f"covariance needs at least 2 rows, got {n}")
    centered = values - values.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    return (cov + cov.T) / 2.0


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Deterministic sign: largest-|component| entry positive, first index wins ties."""
    fixed = vectors.copy()
    for j in range(fixed.shape[1]):
        pivot = int(np.argmax(np.abs(fixed[:, j])))  # argmax takes the lowest index on ties
        if fixed[pivot, j] < 0:
            fixed[:, j] = -fixed[:, j]
    return fixed


def top_k_eigen(C: np.ndarray, k: int, tolerance: float = 1e-10) -> EigenPair:
    """The k largest eigenvalues of a symmetric matrix, with eigenvectors.

    Raises if ``C`` is not symmetric, if ``k`` is out of range, or if
    any returned pair misses the residual bound
    ``||C v - lam v|| <= tolerance * max(1, ||C||_F)``.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("expected a square matrix")
    d = C.shape[0]
    if not (1 <= k <= d):
        raise ValueError(f"k must be in [1, {d}], got {k}")
    scale = max(1.0, float(np.abs(C).max()))
    if float(np.abs(C - C.T).max()) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    C = (C + C.T) / 2.0

    eigenvalues, eigenvectors = np.linalg.eigh(C)  # ascending
    order = np.argsort(-eigenvalues, kind="stable")[:k]
    values = eigenvalues[order]
    vectors = _fix_signs(eigenvectors[:, order])

    norm_bound = tolerance * max(1.0, float(np.linalg.norm(C, "fro")))
    residuals = np.linalg.norm(C @ vectors - vectors * values, axis=0)
    worst = float(residuals.max()) if residuals.size else 0.0
    if worst > norm_bound:
        raise ArithmeticError(
            f"eigensolver residual {worst:.3e} exceeds bound {norm_bound:.3e}"
        )
    return EigenPair(eigenvalues=values, eigenvectors=vectors)


def project(X, pair: EigenPair):
    """Mean-centered data projected onto the eigenvector columns.

    Column i of the result has sample variance equal to eigenvalue i
    (that identity is what makes the reduced space meaningful).
    An :class:`EmbeddingMatrix` input yields an id-aligned
    :class:`ReducedFeatures`; a plain array yields a plain (n, k) array.
    """
    values = _as_array(X)
    if values.ndim != 2 or values.shape[1] != pair.eigenvectors.shape[0]:
        raise ValueError(
            f"cannot project {values.shape} data onto "
            f"{pair.eigenvectors.shape[0]}-dimensional eigenvectors"
        )
    centered = values - values.mean(axis=0)
    reduced = centered @ pair.eigenvectors
    if isinstance(X, EmbeddingMatrix):
        return ReducedFeatures(row_ids=X.row_ids, values=reduced)
    return reduced


def row_variances(R) -> np.ndarray:
    """Population variance of each row across its k reduced coordinates."""
    values = R.values if isinstance(R, ReducedFeatures) else np.asarray(R, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected an (n, k) matrix")
    if values.shape[1] < 2:
        raise ValueError(
            "row variance needs at least 2 reduced dimensions "
            f"(got {values.shape[1]}); variance of a single coordinate is always 0"
        )
    return values.var(axis=1)


def select_top_fraction(
    scores: Sequence[float], ids: Sequence[str], fraction: float
) -> list[str]:
    """The ``ceil(fraction * n)`` ids with the largest scores.

    Ties break by ascending id, so repeated runs select identically.
    Returned in rank order (best first).
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must be in (0, 1]")
    if len(scores) != len(ids):
        raise ValueError(f"{len(scores)} scores for {len(ids)} ids")
    m = math.ceil(fraction * len(ids))
    ranked = sorted(range(len(ids)), key=lambda i: (-float(scores[i]), ids[i]))
    return [ids[i] for i in ranked[:m]]


@dataclass(frozen=True)
class VarietyResult:
    """Curated dataset plus the per-record diagnostics behind it."""

    curated: Dataset
    reduced: ReducedFeatures
    scores: tuple[float, ...]  # aligned with reduced.row_ids
    selected_ids: frozenset[str]


def variety_curate_detailed(
    dataset: Dataset, embeddings: EmbeddingMatrix, config: VarietyConfig
) -> VarietyResult:
    """Full variety pass with diagnostics retained.

    ``embeddings`` must cover exactly the dataset's record ids; rows are
    re-aligned to record order first so permuted inputs select the same
    set. ``reduced_dim`` is clamped to the embedding dimension.
    """
    ids = dataset.ids()
    if set(embeddings.row_ids) != set(ids):
        raise ValueError("embedding rows must cover exactly the dataset's record ids")
    aligned = embeddings.reordered(ids)

    cov = covariance(aligned)
    k = min(config.reduced_dim, aligned.dims)
    pair = top_k_eigen(cov, k, tolerance=config.eigen_tolerance)
    reduced = project(aligned, pair)
    if config.whiten:
        # Unit-variance columns; directions with no variance cannot be scaled.
        scale = np.where(pair.eigenvalues > 0, np.sqrt(pair.eigenvalues), 1.0)
        reduced = ReducedFeatures(row_ids=ids, values=reduced.values / scale)
    scores = row_variances(reduced)
    selected = select_top_fraction(scores.tolist(), list(ids), config.keep_fraction)
    selected_set = frozenset(selected)

    curated = Dataset.from_records(
        (r for r in dataset if r.id in selected_set), dataset.task_profile
    )
    return VarietyResult(
        curated=curated,
        reduced=reduced,
        scores=tuple(float(s) for s in scores),
        selected_ids=selected_set,
    )


def variety_curate(
    dataset: Dataset, embeddings: EmbeddingMatrix, config: VarietyConfig
) -> Dataset:
    """Keep the top ``keep_fraction`` of records by reduced-space row variance.

    Record order among the survivors matches the input dataset.
    """
    return variety_curate_detailed(dataset, embeddings, config).curated


__all__ = [
    "VarietyConfig",
    "EigenPair",
    "ReducedFeatures",
    "VarietyResult",
    "covariance",
    "top_k_eigen",
    "project",
    "row_variances",
    "select_top_fraction",
    "variety_curate_detailed",
    "variety_curate",
]
