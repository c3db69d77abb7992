"""Probabilistic one-to-one word alignment over a parallel corpus.

The model is a positionally biased lexical-translation mixture: every picker
token (source tokens in the forward direction, target tokens in the backward
direction) either aligns to one position on the other side or to null.  The
prior over the other side's position ``i`` for picker position ``j`` puts
weight ``exp(-lambda * |(i+1)/m - (j+1)/n|)`` on each candidate, normalized
over candidates, where ``n`` and ``m`` are the two sentence lengths; the null
option has constant mass ``p0``.  Lexical translation probabilities are
learned by EM; the per-epoch corpus log-likelihood is recorded on the model
and is non-decreasing.

Viterbi decoding links each picker token to its argmax position, or to
nothing when null scores at least as high.  Intersecting forward links with
transposed backward links yields the final one-to-one alignment.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ctxmap.corpus_io import ParallelCorpus
from ctxmap.errors import DataFormatError, ValidationError

DEFAULT_EPOCHS = 5
DEFAULT_DIAGONAL_TENSION = 4.0
DEFAULT_NULL_MASS = 0.08
TRANSLATION_FLOOR = 1e-9


@dataclass(frozen=True)
class SentenceAlignment:
    """Links for one sentence pair, as (source position, target position).

    For alignments produced by a backward-direction model, the first element
    of each link indexes the corpus *target* side; :func:`symmetrize_one_to_one`
    transposes those internally.
    """

    sentence_index: int
    links: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AlignmentModel:
    """Learned lexical table plus the fixed positional-prior parameters.

    ``translation_table`` maps each picker-side type to a distribution over
    the picked-side types observed with it; each inner distribution sums to 1.
    """

    translation_table: dict[str, dict[str, float]]
    diagonal_tension: float
    null_mass: float
    direction: str
    floor: float = TRANSLATION_FLOOR
    epoch_log_likelihoods: tuple[float, ...] = field(default_factory=tuple)

    def probability(self, picker_type: str, picked_type: str) -> float:
        """Translation probability with a floor for unseen pairs."""
        row = self.translation_table.get(picker_type)
        if row is None:
            return self.floor
        return row.get(picked_type, self.floor)


def _oriented_pairs(
    corpus: ParallelCorpus, direction: str
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    if direction == "forward":
        return [(src, tgt) for src, tgt in corpus.pairs]
    if direction == "backward":
        return [(tgt, src) for src, tgt in corpus.pairs]
    raise ValidationError(f"direction must be 'forward' or 'backward', got {direction!r}")


class _PriorCache:
    """Normalized positional priors, memoized by sentence-length pair."""

    def __init__(self, diagonal_tension: float):
        self.diagonal_tension = diagonal_tension
        self._cache: dict[tuple[int, int], list[list[float]]] = {}

    def row(self, j: int, n: int, m: int) -> list[float]:
        table = self._cache.get((n, m))
        if table is None:
            table = []
            for jj in range(n):
                weights = [
                    math.exp(
                        -self.diagonal_tension
                        * abs((i + 1) / m - (jj + 1) / n)
                    )
                    for i in range(m)
                ]
                total = sum(weights)
                table.append([w / total for w in weights])
            self._cache[(n, m)] = table
        return table[j]


def train_aligner(
    corpus: ParallelCorpus,
    direction: str = "forward",
    epochs: int = DEFAULT_EPOCHS,
    diagonal_tension: float = DEFAULT_DIAGONAL_TENSION,
    null_mass: float = DEFAULT_NULL_MASS,
    floor: float = TRANSLATION_FLOOR,
) -> AlignmentModel:
    """EM-train the lexical table on a corpus in the given direction."""
    if len(corpus) == 0:
        raise ValidationError("cannot train an aligner on an empty corpus")
    if epochs < 1:
        raise ValidationError(f"epochs must be >= 1, got {epochs}")
    if not 0.0 <= null_mass < 1.0:
        raise ValidationError(f"null mass must be in [0, 1), got {null_mass}")
    if diagonal_tension <= 0.0:
        raise ValidationError(
            f"diagonal tension must be positive, got {diagonal_tension}"
        )
    pairs = _oriented_pairs(corpus, direction)
    priors = _PriorCache(diagonal_tension)

    # Uniform initialization over each picker type's co-occurring picked types.
    cooc: dict[str, set[str]] = defaultdict(set)
    for pickers, picked in pairs:
        for p in pickers:
            cooc[p].update(picked)
    table: dict[str, dict[str, float]] = {
        p: {q: 1.0 / len(qs) for q in sorted(qs)} for p, qs in cooc.items()
    }

    log_likelihoods: list[float] = []
    for _ in range(epochs):
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        log_likelihood = 0.0
        for pickers, picked in pairs:
            n, m = len(pickers), len(picked)
            for j, picker_type in enumerate(pickers):
                prior = priors.row(j, n, m)
                row = table[picker_type]
                weights = [
                    (1.0 - null_mass) * prior[i] * row[picked[i]] for i in range(m)
                ]
                total = null_mass + sum(weights)
                log_likelihood += math.log(total)
                bucket = counts[picker_type]
                for i in range(m):
                    bucket[picked[i]] += weights[i] / total
        for picker_type, bucket in counts.items():
            norm = sum(bucket.values())
            table[picker_type] = {q: c / norm for q, c in sorted(bucket.items())}
        log_likelihoods.append(log_likelihood)

    return AlignmentModel(
        translation_table={p: dict(row) for p, row in table.items()},
        diagonal_tension=diagonal_tension,
        null_mass=null_mass,
        direction=direction,
        floor=floor,
        epoch_log_likelihoods=tuple(log_likelihoods),
    )


def viterbi_align(model: AlignmentModel, corpus: ParallelCorpus) -> list[SentenceAlignment]:
    """Link each picker token to its argmax position, or drop it for null.

    Ties between picked positions resolve to the smaller position; a token
    whose best lexical option does not strictly beat the null mass is left
    unlinked.  Links are (picker position, picked position) in the model's
    own direction.
    """
    pairs = _oriented_pairs(corpus, model.direction)
    priors = _PriorCache(model.diagonal_tension)
    alignments: list[SentenceAlignment] = []
    for index, (pickers, picked) in enumerate(pairs):
        n, m = len(pickers), len(picked)
        links: list[tuple[int, int]] = []
        for j, picker_type in enumerate(pickers):
            prior = priors.row(j, n, m)
            best_weight = model.null_mass
            best_i = -1
            for i in range(m):
                weight = (
                    (1.0 - model.null_mass)
                    * prior[i]
                    * model.probability(picker_type, picked[i])
                )
                if weight > best_weight:
                    best_weight = weight
                    best_i = i
            if best_i >= 0:
                links.append((j, best_i))
        alignments.append(SentenceAlignment(sentence_index=index, links=tuple(links)))
    return alignments


def _drop_conflicts(links: set[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Keep only links whose source and target positions are both unique."""
    src_multiplicity: dict[int, int] = defaultdict(int)
    tgt_multiplicity: dict[int, int] = defaultdict(int)
    for s, t in links:
        src_multiplicity[s] += 1
        tgt_multiplicity[t] += 1
    return tuple(
        sorted(
            (s, t)
            for s, t in links
            if src_multiplicity[s] == 1 and tgt_multiplicity[t] == 1
        )
    )


def symmetrize_one_to_one(
    forward: Sequence[SentenceAlignment], backward: Sequence[SentenceAlignment]
) -> list[SentenceAlignment]:
    """Intersect forward links with transposed backward links, per sentence.

    The result is one-to-one: any link that would share a source or target
    position with another surviving link is dropped.  Output links are sorted
    by (source position, target position).
    """
    if len(forward) != len(backward):
        raise ValidationError(
            f"alignment list lengths differ: forward {len(forward)}, "
            f"backward {len(backward)}"
        )
    result: list[SentenceAlignment] = []
    for fwd, bwd in zip(forward, backward):
        if fwd.sentence_index != bwd.sentence_index:
            raise ValidationError(
                f"sentence index mismatch: forward {fwd.sentence_index}, "
                f"backward {bwd.sentence_index}"
            )
        transposed = {(t, s) for s, t in bwd.links}
        intersection = set(fwd.links) & transposed
        result.append(
            SentenceAlignment(
                sentence_index=fwd.sentence_index,
                links=_drop_conflicts(intersection),
            )
        )
    return result


def align_corpus(
    corpus: ParallelCorpus,
    epochs: int = DEFAULT_EPOCHS,
    diagonal_tension: float = DEFAULT_DIAGONAL_TENSION,
    null_mass: float = DEFAULT_NULL_MASS,
) -> tuple[list[SentenceAlignment], AlignmentModel, AlignmentModel]:
    """Train both directions, decode, and symmetrize.

    Returns the symmetrized (source position, target position) alignments
    together with the two trained models.
    """
    forward_model = train_aligner(
        corpus, "forward", epochs=epochs,
        diagonal_tension=diagonal_tension, null_mass=null_mass,
    )
    backward_model = train_aligner(
        corpus, "backward", epochs=epochs,
        diagonal_tension=diagonal_tension, null_mass=null_mass,
    )
    forward = viterbi_align(forward_model, corpus)
    backward = viterbi_align(backward_model, corpus)
    return symmetrize_one_to_one(forward, backward), forward_model, backward_model


# ---------------------------------------------------------------------------
# Pharaoh text format: one line per sentence of space-separated "src-tgt"
# ---------------------------------------------------------------------------


def write_alignments(alignments: Iterable[SentenceAlignment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for alignment in alignments:
            handle.write(" ".join(f"{s}-{t}" for s, t in alignment.links))
            handle.write("\n")


def read_alignments(path: str | Path) -> list[SentenceAlignment]:
    alignments: list[SentenceAlignment] = []
    with open(path, "r", encoding="utf-8") as handle:
        for index, raw in enumerate(handle):
            links: list[tuple[int, int]] = []
            for lineno_field in raw.split():
                parts = lineno_field.split("-")
                if len(parts) != 2:
                    raise DataFormatError(
                        f"{path}: malformed link {lineno_field!r} at line {index + 1}"
                    )
                try:
                    links.append((int(parts[0]), int(parts[1])))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: non-integer link {lineno_field!r} at line {index + 1}"
                    ) from None
            alignments.append(
                SentenceAlignment(sentence_index=index, links=tuple(links))
            )
    return alignments
