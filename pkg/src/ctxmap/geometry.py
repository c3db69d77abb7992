"""Geometric diagnostics for embedding spaces and space pairs.

Three quantities are computed, each over a seeded random sample so that a
desk-scale row of numbers is reproducible from one seed:

* isotropy defect: the mean pairwise cosine similarity over a sample of
  ``r`` unit rows — 0 for a perfectly isotropic space, 1 when all rows
  coincide, and ``-1/(N-1)`` for a fully centered unit-norm population;
* isometry defect: the mean absolute difference of squared Euclidean
  distances between corresponding sample pairs of two aligned spaces — 0
  exactly when one space is an orthogonal image of the other;
* relational similarity: the Pearson correlation between the two spaces'
  pairwise-cosine lists over the ``M`` first (most frequent) rows — 1 when
  the spaces are isomorphic in the relational sense.

For unit-norm rows the isometry defect equals the mean of
``2 * |x_i.x_j - y_i.y_j|`` over the same pairs; that identity is exercised
by the test suite as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ctxmap.corpus_io import EmbeddingMatrix, UNIT_NORM_TOL
from ctxmap.errors import ValidationError
from ctxmap.normalize import unit_normalize_rows

DEFAULT_ISOTROPY_SAMPLE = 1000
DEFAULT_RELATIONAL_PAIRS = 1500


@dataclass(frozen=True)
class GeometryReport:
    """One diagnostics row for an aligned space pair."""

    isotropy_source: float
    isotropy_target: float
    isometry_defect: float
    relational_similarity: float
    sample_size: int
    pair_count: int
    seed: int

    def table_row(self) -> str:
        return (
            f"D_t(src)={self.isotropy_source:+.4f}  "
            f"D_t(tgt)={self.isotropy_target:+.4f}  "
            f"D_m={self.isometry_defect:.6f}  "
            f"RS={self.relational_similarity:+.6f}"
        )


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, EmbeddingMatrix):
        return matrix.vectors
    return np.asarray(matrix, dtype=np.float64)


def _sample_indices(n: int, r: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(n, size=r, replace=False)


def isotropy(matrix, r: int = DEFAULT_ISOTROPY_SAMPLE, seed: int = 0) -> float:
    """Mean cosine similarity over the unordered pairs of ``r`` sampled rows.

    Rows must already be unit-normalized (within 1e-6); computed via the
    identity ``sum_{i<j} v_i.v_j = (||sum v||^2 - sum ||v||^2) / 2``.
    """
    vectors = _as_array(matrix)
    n = vectors.shape[0]
    if r > n:
        raise ValidationError(f"sample size r={r} exceeds row count N={n}")
    if r < 2:
        raise ValidationError(f"sample size r={r} must be at least 2")
    norms = np.linalg.norm(vectors, axis=1)
    worst = int(np.argmax(np.abs(norms - 1.0)))
    if abs(norms[worst] - 1.0) > UNIT_NORM_TOL:
        raise ValidationError(
            f"isotropy needs unit-normalized rows; row {worst} has norm "
            f"{norms[worst]!r}"
        )
    sample = vectors[_sample_indices(n, r, seed)]
    total = sample.sum(axis=0)
    sum_sq = float(np.einsum("ij,ij->", sample, sample))
    return (float(total @ total) - sum_sq) / (r * (r - 1))


def isometry_defect(
    source, target, r: int = DEFAULT_ISOTROPY_SAMPLE, seed: int = 0
) -> float:
    """Mean |squared-distance difference| over shared sampled row pairs."""
    x = _as_array(source)
    y = _as_array(target)
    if x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"aligned matrices must have equal row counts, got {x.shape[0]} "
            f"and {y.shape[0]}"
        )
    n = x.shape[0]
    if r > n:
        raise ValidationError(f"sample size r={r} exceeds row count N={n}")
    if r < 2:
        raise ValidationError(f"sample size r={r} must be at least 2")
    idx = _sample_indices(n, r, seed)
    dx = pdist(x[idx], metric="sqeuclidean")
    dy = pdist(y[idx], metric="sqeuclidean")
    return float(np.mean(np.abs(dx - dy)))


def relational_similarity(
    source, target, pair_count: int = DEFAULT_RELATIONAL_PAIRS
) -> float:
    """Pearson correlation of the two spaces' pairwise-cosine lists.

    Uses the first ``pair_count`` rows of each matrix (callers order rows by
    frequency, so this is the most-frequent prefix).
    """
    x = _as_array(source)
    y = _as_array(target)
    if x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"aligned matrices must have equal row counts, got {x.shape[0]} "
            f"and {y.shape[0]}"
        )
    n = x.shape[0]
    if pair_count > n:
        raise ValidationError(
            f"pair count M={pair_count} exceeds row count N={n}"
        )
    if pair_count < 3:
        raise ValidationError(f"pair count M={pair_count} must be at least 3")
    xn = unit_normalize_rows(x[:pair_count])
    yn = unit_normalize_rows(y[:pair_count])
    iu = np.triu_indices(pair_count, k=1)
    a = (xn @ xn.T)[iu]
    b = (yn @ yn.T)[iu]
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        raise ValidationError(
            "relational similarity undefined: a pairwise-cosine list has "
            "zero variance"
        )
    return float(np.clip((a @ b) / denom, -1.0, 1.0))


def geometry_report(
    source,
    target,
    r: int = DEFAULT_ISOTROPY_SAMPLE,
    pair_count: int = DEFAULT_RELATIONAL_PAIRS,
    seed: int = 0,
) -> GeometryReport:
    """All three diagnostics over one shared sample.

    Rows are unit-normalized internally (cosine-based quantities are
    scale-free, and the distance comparison is meaningful on the sphere for
    raw spaces too), so callers may pass unnormalized matrices.
    """
    x = unit_normalize_rows(_as_array(source))
    y = unit_normalize_rows(_as_array(target))
    if x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"aligned matrices must have equal row counts, got {x.shape[0]} "
            f"and {y.shape[0]}"
        )
    n = x.shape[0]
    r_eff = min(r, n)
    m_eff = min(pair_count, n)
    idx = _sample_indices(n, r_eff, seed)
    xs, ys = x[idx], y[idx]

    def mean_pair_cosine(sample: np.ndarray) -> float:
        total = sample.sum(axis=0)
        sum_sq = float(np.einsum("ij,ij->", sample, sample))
        k = sample.shape[0]
        return (float(total @ total) - sum_sq) / (k * (k - 1))

    dx = pdist(xs, metric="sqeuclidean")
    dy = pdist(ys, metric="sqeuclidean")
    return GeometryReport(
        isotropy_source=mean_pair_cosine(xs),
        isotropy_target=mean_pair_cosine(ys),
        isometry_defect=float(np.mean(np.abs(dx - dy))),
        relational_similarity=relational_similarity(x, y, m_eff),
        sample_size=r_eff,
        pair_count=m_eff,
        seed=seed,
    )
