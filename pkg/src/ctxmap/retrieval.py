"""Nearest-neighbour retrieval across two unit-normalized embedding spaces.

Two scoring rules are provided:

* plain cosine (``nn``), and
* cosine corrected by mean neighbourhood similarity on both sides
  (``csls``), which demotes "hub" vectors that are close to everything
  and would otherwise be retrieved for many unrelated queries.  The
  corrected score for query ``q`` and target ``t`` is
  ``2·cos(q, t) − r_T(q) − r_S(t)`` where ``r_T(q)`` is the mean cosine
  from ``q`` to its ``neighborhood`` closest targets and ``r_S(t)`` the
  mean cosine from ``t`` to its ``neighborhood`` closest queries.

Ties are broken toward the smaller target index, deterministically.
:func:`evaluate_bdi` scores retrieval against a reference dictionary
(precision at k over the dictionary's source words).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus_io import UNIT_NORM_TOL, BilingualDictionary, EmbeddingMatrix
from .errors import ValidationError

DEFAULT_NEIGHBORHOOD = 10
DEFAULT_K_VALUES = (1, 5, 10)

__all__ = [
    "DEFAULT_NEIGHBORHOOD",
    "DEFAULT_K_VALUES",
    "RetrievalResult",
    "EvalReport",
    "nn_retrieve",
    "csls_retrieve",
    "precision_at_k",
    "evaluate_bdi",
]


@dataclass(frozen=True)
class RetrievalResult:
    """Top-k retrieval output: one row of target indices per query."""

    method: str
    indices: np.ndarray  # (n_queries, k) int64
    scores: np.ndarray  # (n_queries, k) float64, same order as indices


@dataclass(frozen=True)
class EvalReport:
    """Dictionary-induction evaluation summary.

    ``precision_at`` maps each cutoff k to a percentage in [0, 100].
    ``evaluated`` counts dictionary source words actually scored;
    ``skipped_source_oov`` counts source words absent from the source
    matrix and ``skipped_target_oov`` counts those whose reference
    translations are all absent from the target matrix.
    ``neighborhood`` is the correction neighbourhood actually used
    (the requested value, clamped to the available query/target counts).
    """

    method: str
    precision_at: dict[int, float]
    evaluated: int
    skipped_source_oov: int
    skipped_target_oov: int
    neighborhood: int

    @property
    def coverage(self) -> float:
        total = self.evaluated + self.skipped_source_oov + self.skipped_target_oov
        return self.evaluated / total if total else 0.0

    def lines(self) -> list[str]:
        parts = [f"method={self.method}"]
        for k in sorted(self.precision_at):
            parts.append(f"P@{k}={self.precision_at[k]:.2f}")
        parts.append(
            f"evaluated={self.evaluated} "
            f"skipped_source_oov={self.skipped_source_oov} "
            f"skipped_target_oov={self.skipped_target_oov}"
        )
        return parts


def _checked_rows(name: str, rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} rows must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1:
        raise ValidationError(f"{name} rows are empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} rows contain non-finite values")
    norms = np.linalg.norm(arr, axis=1)
    off = np.abs(norms - 1.0)
    worst = int(np.argmax(off))
    if off[worst] > UNIT_NORM_TOL:
        raise ValidationError(
            f"{name} row {worst} is not unit-normalized "
            f"(norm {norms[worst]:.6g}); normalize before retrieval"
        )
    return arr


def _query_target(queries, targets, k: int) -> tuple[np.ndarray, np.ndarray]:
    q = _checked_rows("query", queries)
    t = _checked_rows("target", targets)
    if q.shape[1] != t.shape[1]:
        raise ValidationError(
            f"query dimension {q.shape[1]} does not match target "
            f"dimension {t.shape[1]}"
        )
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > t.shape[0]:
        raise ValidationError(
            f"k={k} exceeds the number of targets ({t.shape[0]})"
        )
    return q, t


def _top_k(scores: np.ndarray, k: int, method: str) -> RetrievalResult:
    # Stable sort on negated scores: equal scores keep ascending target
    # index order, making tie-breaks deterministic.
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    picked = np.take_along_axis(scores, order, axis=1)
    return RetrievalResult(method=method, indices=order, scores=picked)


def nn_retrieve(queries, targets, k: int = 1) -> RetrievalResult:
    """Top-k targets per query by plain cosine similarity."""
    q, t = _query_target(queries, targets, k)
    return _top_k(q @ t.T, k, "nn")


def _mean_top(values: np.ndarray, count: int, axis: int) -> np.ndarray:
    """Mean of the ``count`` largest entries along ``axis``."""
    part = np.partition(values, values.shape[axis] - count, axis=axis)
    if axis == 1:
        return part[:, -count:].mean(axis=1)
    return part[-count:, :].mean(axis=0)


def csls_retrieve(
    queries, targets, k: int = 1, neighborhood: int = DEFAULT_NEIGHBORHOOD
) -> RetrievalResult:
    """Top-k targets per query by neighbourhood-corrected cosine.

    ``neighborhood`` must not exceed either the number of targets (for
    the query-side correction) or the number of queries (for the
    target-side correction).
    """
    q, t = _query_target(queries, targets, k)
    if neighborhood < 1:
        raise ValidationError(
            f"neighborhood must be >= 1, got {neighborhood}"
        )
    if neighborhood > t.shape[0]:
        raise ValidationError(
            f"neighborhood={neighborhood} exceeds the number of targets "
            f"({t.shape[0]})"
        )
    if neighborhood > q.shape[0]:
        raise ValidationError(
            f"neighborhood={neighborhood} exceeds the number of queries "
            f"({q.shape[0]})"
        )
    sims = q @ t.T
    r_query = _mean_top(sims, neighborhood, axis=1)  # per query row
    r_target = _mean_top(sims, neighborhood, axis=0)  # per target column
    scores = 2.0 * sims - r_query[:, None] - r_target[None, :]
    return _top_k(scores, k, "csls")


def precision_at_k(indices: np.ndarray, gold_sets, ks) -> dict[int, float]:
    """Percentage of queries whose top-k contains any gold index."""
    if len(gold_sets) != indices.shape[0]:
        raise ValidationError(
            f"got {indices.shape[0]} retrieval rows but {len(gold_sets)} "
            "gold sets"
        )
    ks = tuple(ks)
    for k in ks:
        if k < 1 or k > indices.shape[1]:
            raise ValidationError(
                f"cannot score P@{k} from top-{indices.shape[1]} retrieval"
            )
    out = {}
    n = indices.shape[0]
    if n == 0:
        return {k: 0.0 for k in ks}
    for k in ks:
        hits = sum(
            1
            for row, gold in zip(indices[:, :k], gold_sets)
            if gold and not gold.isdisjoint(row.tolist())
        )
        out[k] = 100.0 * hits / n
    return out


def evaluate_bdi(
    source: EmbeddingMatrix,
    target: EmbeddingMatrix,
    dictionary: BilingualDictionary,
    *,
    method: str = "csls",
    k_values=DEFAULT_K_VALUES,
    neighborhood: int = DEFAULT_NEIGHBORHOOD,
) -> EvalReport:
    """Score dictionary induction: retrieve translations for every
    dictionary source word present in ``source`` and check the reference
    translations present in ``target``.

    The correction neighbourhood is clamped to the number of evaluated
    queries and targets so small filtered dictionaries remain scorable;
    the clamped value is recorded in the report.
    """
    if method not in ("nn", "csls"):
        raise ValidationError(f"unknown retrieval method {method!r}")
    k_values = tuple(sorted(set(int(k) for k in k_values)))
    if not k_values:
        raise ValidationError("at least one precision cutoff is required")
    if k_values[0] < 1:
        raise ValidationError(f"precision cutoffs must be >= 1, got {k_values[0]}")

    query_rows = []
    gold_sets = []
    skipped_source = 0
    skipped_target = 0
    for word in dictionary.source_words():
        if word not in source:
            skipped_source += 1
            continue
        gold = {
            target.index_of(t)
            for t in dictionary.targets_for(word)
            if t in target
        }
        if not gold:
            skipped_target += 1
            continue
        query_rows.append(source.row(word))
        gold_sets.append(gold)

    max_k = k_values[-1]
    if max_k > len(target.words):
        raise ValidationError(
            f"P@{max_k} requested but the target matrix has only "
            f"{len(target.words)} rows"
        )
    if not query_rows:
        return EvalReport(
            method=method,
            precision_at={k: 0.0 for k in k_values},
            evaluated=0,
            skipped_source_oov=skipped_source,
            skipped_target_oov=skipped_target,
            neighborhood=0,
        )

    queries = np.vstack(query_rows)
    effective = min(neighborhood, queries.shape[0], len(target.words))
    if method == "nn":
        result = nn_retrieve(queries, target.vectors, k=max_k)
    else:
        result = csls_retrieve(
            queries, target.vectors, k=max_k, neighborhood=effective
        )
    return EvalReport(
        method=method,
        precision_at=precision_at_k(result.indices, gold_sets, k_values),
        evaluated=len(gold_sets),
        skipped_source_oov=skipped_source,
        skipped_target_oov=skipped_target,
        neighborhood=effective if method == "csls" else 0,
    )
