"""Row normalization and iterative normalization of embedding matrices.

Iterative normalization alternates two steps: scale every row to unit length,
then subtract the mean row.  A handful of rounds drives the matrix toward
simultaneously unit-norm rows and a zero mean vector, which removes the
common-direction bias that makes raw spaces anisotropic.  The last step
re-normalizes rows so the output always carries the ``normalized`` flag.

:class:`IterativeNormalizer` records the mean subtracted at every round so
the identical affine sequence can be replayed onto other vectors living in
the same space (e.g. a second matrix whose rows must stay comparable with
the fitted one after normalization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ctxmap.corpus_io import EmbeddingMatrix
from ctxmap.errors import ValidationError

DEFAULT_MAX_ITERS = 5
DEFAULT_MEAN_TOL = 1e-3
_ZERO_NORM = 1e-15


@dataclass(frozen=True)
class NormalizationReport:
    """Outcome of iterative normalization.

    ``final_max_norm_deviation`` is the largest row-norm deviation from 1
    after the last centering step, before the closing re-normalization;
    ``final_mean_norm`` is the norm of the output matrix's mean row.
    """

    iterations: int
    final_max_norm_deviation: float
    final_mean_norm: float


@dataclass(frozen=True)
class IterativeNormalizer:
    """Replayable normalization: per-round subtracted means, then re-norm."""

    means: tuple[np.ndarray, ...]

    def apply_to_array(self, vectors: np.ndarray) -> np.ndarray:
        out = np.asarray(vectors, dtype=np.float64).copy()
        for mean in self.means:
            out = _unit_rows(out)
            out -= mean
        return _unit_rows(out)

    def apply(self, matrix: EmbeddingMatrix) -> EmbeddingMatrix:
        return EmbeddingMatrix(
            words=matrix.words,
            vectors=self.apply_to_array(matrix.vectors),
            normalized=True,
        )


def _unit_rows(vectors: np.ndarray, keys=None) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms <= _ZERO_NORM):
        idx = int(np.argwhere(norms <= _ZERO_NORM).ravel()[0])
        label = keys[idx] if keys is not None else f"row {idx}"
        raise ValidationError(f"cannot normalize zero-norm vector at {label}")
    return vectors / norms[:, None]


def unit_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit Euclidean norm; zero rows name their key."""
    vectors = _unit_rows(matrix.vectors, keys=matrix.words)
    return EmbeddingMatrix(words=matrix.words, vectors=vectors, normalized=True)


def unit_normalize_rows(vectors: np.ndarray) -> np.ndarray:
    """Array form of :func:`unit_normalize`."""
    return _unit_rows(np.asarray(vectors, dtype=np.float64))


def fit_iterative_normalizer(
    matrix: EmbeddingMatrix,
    max_iters: int = DEFAULT_MAX_ITERS,
    mean_tol: float = DEFAULT_MEAN_TOL,
) -> tuple[IterativeNormalizer, EmbeddingMatrix, NormalizationReport]:
    """Run iterative normalization and keep the per-round means.

    Rounds stop early once the subtracted mean's norm and the post-centering
    row-norm deviations are both within ``mean_tol``; at most ``max_iters``
    rounds run.  Returns the replayable normalizer, the normalized matrix,
    and a report.
    """
    if len(matrix) < 2:
        raise ValidationError(
            f"iterative normalization needs at least 2 rows, got {len(matrix)}"
        )
    if max_iters < 1:
        raise ValidationError(f"max_iters must be >= 1, got {max_iters}")
    if mean_tol <= 0:
        raise ValidationError(f"mean_tol must be positive, got {mean_tol}")

    vectors = np.asarray(matrix.vectors, dtype=np.float64).copy()
    means: list[np.ndarray] = []
    iterations = 0
    deviation = np.inf
    for _ in range(max_iters):
        vectors = _unit_rows(vectors, keys=matrix.words)
        mean = vectors.mean(axis=0)
        means.append(mean)
        vectors = vectors - mean
        iterations += 1
        deviation = float(np.max(np.abs(np.linalg.norm(vectors, axis=1) - 1.0)))
        if float(np.linalg.norm(mean)) <= mean_tol and deviation <= mean_tol:
            break

    vectors = _unit_rows(vectors, keys=matrix.words)
    report = NormalizationReport(
        iterations=iterations,
        final_max_norm_deviation=deviation,
        final_mean_norm=float(np.linalg.norm(vectors.mean(axis=0))),
    )
    normalized = EmbeddingMatrix(words=matrix.words, vectors=vectors, normalized=True)
    return IterativeNormalizer(means=tuple(means)), normalized, report


def iterative_normalize(
    matrix: EmbeddingMatrix,
    max_iters: int = DEFAULT_MAX_ITERS,
    mean_tol: float = DEFAULT_MEAN_TOL,
) -> tuple[EmbeddingMatrix, NormalizationReport]:
    """Iteratively normalize a matrix; see :func:`fit_iterative_normalizer`."""
    _, normalized, report = fit_iterative_normalizer(matrix, max_iters, mean_tol)
    return normalized, report
