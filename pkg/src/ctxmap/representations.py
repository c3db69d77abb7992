"""Type- and sense-level vectors from aligned token embedding streams.

Given a sentence-aligned corpus, word-level alignment links, and one
contextual embedding per token on each side, this module:

* collects, per source word type, the sampled set of (source vector,
  aligned target vector) occurrence pairs (:func:`collect_occurrences`);
* averages them into one anchor vector per type on each side
  (:func:`build_type_level`), producing the silver training pairs for
  map fitting;
* optionally splits polysemous types into senses by clustering their
  source occurrence vectors (:func:`cluster_senses`), with the number
  of senses chosen from the shape of the clustering-cost curve;
* averages *all* embedded tokens of one corpus side into a vocabulary
  matrix used as the retrieval target space (:func:`build_vocab_matrix`).

Sampling uses one reservoir per word type with a random stream derived
from (run seed, word), so results do not depend on dictionary iteration
order and never require holding more than ``cap`` occurrences per type.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .corpus_io import (
    EmbeddingMatrix,
    ParallelCorpus,
    TokenEmbeddingStream,
    iter_sides,
    normalize_rows,
    validate_stream_against_corpus,
)
from .errors import DataFormatError, ValidationError

DEFAULT_OCCURRENCE_CAP = 10000
DEFAULT_MIN_COUNT = 5
DEFAULT_SENSE_MIN_COUNT = 100
DEFAULT_MAX_SENSES = 8
DEFAULT_KNEE_SENSITIVITY = 1.0
KNEE_THRESHOLD = 0.45
KMEANS_MAX_ITERS = 100
KMEANS_TOL = 1e-6

_PAIRS_MAGIC = b"CPVT"
_PAIRS_VERSION = 1

__all__ = [
    "DEFAULT_OCCURRENCE_CAP",
    "DEFAULT_MIN_COUNT",
    "DEFAULT_SENSE_MIN_COUNT",
    "DEFAULT_MAX_SENSES",
    "DEFAULT_KNEE_SENSITIVITY",
    "TypeOccurrences",
    "PairedVectors",
    "KMeansResult",
    "collect_occurrences",
    "build_type_level",
    "build_vocab_matrix",
    "kmeans",
    "detect_knee",
    "choose_num_senses",
    "cluster_senses",
    "sense_base_word",
    "write_paired_vectors",
    "read_paired_vectors",
]


@dataclass
class TypeOccurrences:
    """Sampled occurrences of one source word type.

    ``total_count`` counts every occurrence seen; the parallel lists hold
    the sampled subset (at most the collection cap).  ``src_vectors[i]``
    is the contextual vector of the source token and ``tgt_vectors[i]``
    the vector of the target token it was aligned to.
    """

    word: str
    total_count: int = 0
    sent_indices: list[int] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)
    src_vectors: list[np.ndarray] = field(default_factory=list)
    tgt_vectors: list[np.ndarray] = field(default_factory=list)

    @property
    def sampled_count(self) -> int:
        return len(self.src_vectors)


def _type_rng(seed: int, word: str, *extra: int) -> np.random.Generator:
    """Random stream unique to (seed, word[, extra]) — iteration-order free."""
    return np.random.default_rng((seed, zlib.crc32(word.encode("utf-8")), *extra))


def _reservoir_slot(rng: np.random.Generator, total_seen: int, cap: int, size: int):
    """Reservoir-sampling slot for the ``total_seen``-th item (1-based).

    Returns ``size`` to append, an index < cap to replace, or None to skip.
    """
    if size < cap:
        return size
    j = int(rng.integers(0, total_seen))
    return j if j < cap else None


def _frequency_order(occurrences: dict[str, TypeOccurrences]) -> list[TypeOccurrences]:
    """Most frequent first; ties broken alphabetically."""
    return sorted(occurrences.values(), key=lambda o: (-o.total_count, o.word))


def _type_mean(vectors: list[np.ndarray]) -> np.ndarray:
    # Shared by the type-level builder and the single-sense path of the
    # sense builder, so a word that ends up with one sense gets a vector
    # bitwise-equal to its type-level vector.
    return np.mean(np.stack(vectors), axis=0)


def collect_occurrences(
    corpus: ParallelCorpus,
    alignments,
    source_stream: TokenEmbeddingStream,
    target_stream: TokenEmbeddingStream,
    *,
    seed: int = 0,
    cap: int = DEFAULT_OCCURRENCE_CAP,
    min_count: int = DEFAULT_MIN_COUNT,
) -> dict[str, TypeOccurrences]:
    """Gather aligned (source vector, target vector) pairs per source type.

    A link contributes only when both tokens have embeddings present.
    Types seen fewer than ``min_count`` times are dropped.
    """
    if cap < 1:
        raise ValidationError(f"occurrence cap must be >= 1, got {cap}")
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")
    src_sents, tgt_sents = iter_sides(corpus)
    validate_stream_against_corpus(source_stream, src_sents, "source stream")
    validate_stream_against_corpus(target_stream, tgt_sents, "target stream")
    if len(alignments) != len(corpus.pairs):
        raise ValidationError(
            f"got {len(alignments)} sentence alignments for "
            f"{len(corpus.pairs)} sentence pairs"
        )
    occurrences: dict[str, TypeOccurrences] = {}
    rngs: dict[str, np.random.Generator] = {}
    for k, (alignment, (src_tokens, tgt_tokens)) in enumerate(
        zip(alignments, corpus.pairs)
    ):
        if alignment.sentence_index != k:
            raise ValidationError(
                f"alignment {k} carries sentence_index "
                f"{alignment.sentence_index}"
            )
        for i, j in alignment.links:
            if i >= len(src_tokens) or j >= len(tgt_tokens):
                raise ValidationError(
                    f"sentence {k}: link {i}-{j} is outside the sentence "
                    f"({len(src_tokens)} source / {len(tgt_tokens)} target tokens)"
                )
            src_record = source_stream.sentences[k][i]
            tgt_record = target_stream.sentences[k][j]
            if not (src_record.present and tgt_record.present):
                continue
            word = src_tokens[i]
            occ = occurrences.get(word)
            if occ is None:
                occ = occurrences[word] = TypeOccurrences(word=word)
                rngs[word] = _type_rng(seed, word)
            occ.total_count += 1
            slot = _reservoir_slot(
                rngs[word], occ.total_count, cap, occ.sampled_count
            )
            if slot is None:
                continue
            src_vec = np.asarray(src_record.vector, dtype=np.float64)
            tgt_vec = np.asarray(tgt_record.vector, dtype=np.float64)
            if slot == occ.sampled_count:
                occ.sent_indices.append(k)
                occ.positions.append(i)
                occ.src_vectors.append(src_vec)
                occ.tgt_vectors.append(tgt_vec)
            else:
                occ.sent_indices[slot] = k
                occ.positions[slot] = i
                occ.src_vectors[slot] = src_vec
                occ.tgt_vectors[slot] = tgt_vec
    return {
        word: occ
        for word, occ in occurrences.items()
        if occ.total_count >= min_count
    }


@dataclass(frozen=True)
class PairedVectors:
    """Row-aligned source/target vectors under shared keys.

    Keys are word types (type level) or ``word#i`` sense labels (sense
    level).  ``counts[i]`` is the number of occurrences key i stands
    for.  Rows are unit-normalized; source and target dimensions may
    differ.
    """

    counts: tuple[int, ...]
    source: EmbeddingMatrix
    target: EmbeddingMatrix

    def __post_init__(self) -> None:
        if self.source.words != self.target.words:
            raise ValidationError(
                "paired vectors must share keys on both sides"
            )
        if len(self.counts) != len(self.source.words):
            raise ValidationError(
                f"got {len(self.counts)} counts for "
                f"{len(self.source.words)} keys"
            )
        for i, count in enumerate(self.counts):
            if count < 1:
                raise ValidationError(
                    f"count for key {self.source.words[i]!r} must be >= 1, "
                    f"got {count}"
                )

    @property
    def keys(self) -> tuple[str, ...]:
        return self.source.words

    def __len__(self) -> int:
        return len(self.counts)


def build_type_level(occurrences: dict[str, TypeOccurrences]) -> PairedVectors:
    """One anchor pair per type: unit-normalized means of the sampled
    source vectors and of their aligned target vectors, ordered most
    frequent first (ties alphabetical)."""
    if not occurrences:
        raise ValidationError("no type occurrences to build from")
    order = _frequency_order(occurrences)
    words = tuple(o.word for o in order)
    counts = tuple(o.total_count for o in order)
    src = normalize_rows(
        np.stack([_type_mean(o.src_vectors) for o in order]),
        "source type vectors",
        keys=words,
    )
    tgt = normalize_rows(
        np.stack([_type_mean(o.tgt_vectors) for o in order]),
        "target type vectors",
        keys=words,
    )
    return PairedVectors(
        counts=counts,
        source=EmbeddingMatrix(words=words, vectors=src, normalized=True),
        target=EmbeddingMatrix(words=words, vectors=tgt, normalized=True),
    )


def build_vocab_matrix(
    sentences,
    stream: TokenEmbeddingStream,
    *,
    seed: int = 0,
    cap: int = DEFAULT_OCCURRENCE_CAP,
    min_count: int = DEFAULT_MIN_COUNT,
    name: str = "vocabulary stream",
) -> EmbeddingMatrix:
    """Average every embedded token of one corpus side into a per-type
    matrix (the retrieval target space), most frequent type first."""
    if cap < 1:
        raise ValidationError(f"occurrence cap must be >= 1, got {cap}")
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")
    validate_stream_against_corpus(stream, sentences, name)
    totals: dict[str, int] = {}
    sampled: dict[str, list[np.ndarray]] = {}
    rngs: dict[str, np.random.Generator] = {}
    for k, tokens in enumerate(sentences):
        records = stream.sentences[k]
        for i in range(len(tokens)):
            record = records[i]
            if not record.present:
                continue
            word = tokens[i]
            if word not in totals:
                totals[word] = 0
                sampled[word] = []
                rngs[word] = _type_rng(seed, word)
            totals[word] += 1
            slot = _reservoir_slot(
                rngs[word], totals[word], cap, len(sampled[word])
            )
            if slot is None:
                continue
            vec = np.asarray(record.vector, dtype=np.float64)
            if slot == len(sampled[word]):
                sampled[word].append(vec)
            else:
                sampled[word][slot] = vec
    kept = [
        (word, totals[word]) for word in totals if totals[word] >= min_count
    ]
    if not kept:
        raise ValidationError(
            f"{name}: no type reached min_count={min_count}"
        )
    kept.sort(key=lambda item: (-item[1], item[0]))
    words = tuple(word for word, _ in kept)
    vectors = normalize_rows(
        np.stack([_type_mean(sampled[word]) for word in words]),
        name,
        keys=words,
    )
    return EmbeddingMatrix(words=words, vectors=vectors, normalized=True)


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray  # (k, dim)
    labels: np.ndarray  # (n,) int64
    inertia: float  # sum of squared distances to assigned centroid
    iterations: int


def _squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) matrix via the expansion ||x||^2 - 2 x.mu + ||mu||^2; avoids
    # materializing an (n, k, dim) broadcast.
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ centroids.T)
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans(
    vectors,
    k: int,
    rng: np.random.Generator,
    *,
    max_iters: int = KMEANS_MAX_ITERS,
    tol: float = KMEANS_TOL,
) -> KMeansResult:
    """Lloyd's algorithm with distance-weighted (k-means++) seeding.

    Deterministic given ``rng``'s state: assignment ties go to the
    smaller cluster index and empty clusters are re-seeded from the
    point currently farthest from its assigned centroid.  Stops when
    labels repeat or the inertia improvement falls below ``tol``
    (relative), at latest after ``max_iters`` rounds.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"clustering input must be 2-D, got {x.ndim}-D")
    n = x.shape[0]
    if n < 1:
        raise ValidationError("clustering input is empty")
    if not np.all(np.isfinite(x)):
        raise ValidationError("clustering input contains non-finite values")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points ({n})")

    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    centroids[0] = x[int(rng.integers(0, n))]
    nearest_d2 = _squared_distances(x, centroids[:1])[:, 0]
    for c in range(1, k):
        total = float(nearest_d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(rng.choice(n, p=nearest_d2 / total))
        centroids[c] = x[idx]
        nearest_d2 = np.minimum(
            nearest_d2, _squared_distances(x, centroids[c : c + 1])[:, 0]
        )

    prev_labels = None
    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int64)
    inertia = 0.0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d2 = _squared_distances(x, centroids)
        labels = np.argmin(d2, axis=1).astype(np.int64)
        point_d2 = d2[np.arange(n), labels]
        for c in range(k):
            if not np.any(labels == c):
                far = int(np.argmax(point_d2))
                centroids[c] = x[far]
                labels[far] = c
                point_d2[far] = 0.0
        inertia = float(point_d2.sum())
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        if np.isfinite(prev_inertia) and abs(prev_inertia - inertia) <= tol * max(
            prev_inertia, 1e-12
        ):
            break
        for c in range(k):
            centroids[c] = x[labels == c].mean(axis=0)
        prev_labels = labels
        prev_inertia = inertia
    return KMeansResult(
        centroids=centroids, labels=labels, inertia=inertia, iterations=iterations
    )


def detect_knee(values, sensitivity: float = DEFAULT_KNEE_SENSITIVITY):
    """Index of the elbow of a non-increasing cost curve, or None.

    The curve is normalized to the unit square and the gap between it
    and the straight diagonal is measured; a knee is reported at the
    largest gap only when that gap clears ``sensitivity * 0.45`` —
    calibrated so single-cluster cost curves (gap ≈ 0.2) report no knee
    while well-separated two-cluster curves (gap ≈ 0.7+) do.  Curves
    with fewer than 3 points, or flat curves, have no knee.
    """
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1:
        raise ValidationError(f"cost curve must be 1-D, got {y.ndim}-D")
    if not np.all(np.isfinite(y)):
        raise ValidationError("cost curve contains non-finite values")
    if sensitivity <= 0:
        raise ValidationError(f"sensitivity must be > 0, got {sensitivity}")
    n = y.size
    if n < 3:
        return None
    if np.any(y[1:] > y[:-1]):
        raise ValidationError(
            "cost curve must be non-increasing; clip it first "
            "(e.g. np.minimum.accumulate)"
        )
    lo, hi = float(y.min()), float(y.max())
    if hi <= lo:
        return None
    x_norm = np.linspace(0.0, 1.0, n)
    y_norm = (y - lo) / (hi - lo)
    gap = (1.0 - y_norm) - x_norm
    best = int(np.argmax(gap))
    if gap[best] <= sensitivity * KNEE_THRESHOLD:
        return None
    return best


def _inertia_curve(
    x: np.ndarray, word: str, seed: int, k_max: int
) -> list[KMeansResult]:
    return [
        kmeans(x, k, _type_rng(seed, word, k)) for k in range(1, k_max + 1)
    ]


def choose_num_senses(
    vectors,
    word: str,
    *,
    seed: int = 0,
    max_senses: int = DEFAULT_MAX_SENSES,
    sensitivity: float = DEFAULT_KNEE_SENSITIVITY,
) -> int:
    """Number of senses suggested by the clustering-cost elbow (1 if none)."""
    x = np.asarray(vectors, dtype=np.float64)
    k_max = min(max_senses, x.shape[0] if x.ndim == 2 else 0)
    if k_max < 3:
        return 1
    results = _inertia_curve(x, word, seed, k_max)
    clipped = np.minimum.accumulate([r.inertia for r in results])
    idx = detect_knee(clipped, sensitivity)
    return 1 if idx is None else idx + 1


def cluster_senses(
    occurrences: dict[str, TypeOccurrences],
    *,
    stopwords: frozenset[str] = frozenset(),
    seed: int = 0,
    sense_min_count: int = DEFAULT_SENSE_MIN_COUNT,
    max_senses: int = DEFAULT_MAX_SENSES,
    sensitivity: float = DEFAULT_KNEE_SENSITIVITY,
) -> PairedVectors:
    """Split types into senses by clustering their source vectors.

    A type is only eligible for splitting when it is not a stopword and
    occurs more than ``sense_min_count`` times; everything else keeps a
    single sense whose vector is bitwise-identical to its type-level
    vector.  Sense keys are ``word#i`` with i starting at 1, ordered by
    descending cluster size within each word.  Counts are total
    occurrences for single-sense words and sampled cluster sizes for
    split words.
    """
    if not occurrences:
        raise ValidationError("no type occurrences to build from")
    keys: list[str] = []
    counts: list[int] = []
    src_rows: list[np.ndarray] = []
    tgt_rows: list[np.ndarray] = []
    for occ in _frequency_order(occurrences):
        n = occ.sampled_count
        k_star = 1
        labels = None
        eligible = (
            occ.word not in stopwords
            and occ.total_count > sense_min_count
            and min(max_senses, n) >= 3
        )
        if eligible:
            x = np.stack(occ.src_vectors)
            results = _inertia_curve(x, occ.word, seed, min(max_senses, n))
            clipped = np.minimum.accumulate([r.inertia for r in results])
            idx = detect_knee(clipped, sensitivity)
            if idx is not None and idx > 0:
                k_star = idx + 1
                labels = results[idx].labels
        if k_star == 1:
            keys.append(f"{occ.word}#1")
            counts.append(occ.total_count)
            src_rows.append(_type_mean(occ.src_vectors))
            tgt_rows.append(_type_mean(occ.tgt_vectors))
            continue
        xs = np.stack(occ.src_vectors)
        ts = np.stack(occ.tgt_vectors)
        sizes = sorted(
            ((int(np.sum(labels == c)), c) for c in range(k_star)),
            key=lambda item: (-item[0], item[1]),
        )
        for rank, (size, c) in enumerate(sizes, start=1):
            mask = labels == c
            keys.append(f"{occ.word}#{rank}")
            counts.append(size)
            src_rows.append(xs[mask].mean(axis=0))
            tgt_rows.append(ts[mask].mean(axis=0))
    key_tuple = tuple(keys)
    src = normalize_rows(np.stack(src_rows), "source sense vectors", keys=key_tuple)
    tgt = normalize_rows(np.stack(tgt_rows), "target sense vectors", keys=key_tuple)
    return PairedVectors(
        counts=tuple(counts),
        source=EmbeddingMatrix(words=key_tuple, vectors=src, normalized=True),
        target=EmbeddingMatrix(words=key_tuple, vectors=tgt, normalized=True),
    )


def sense_base_word(key: str) -> str:
    """The word a ``word#i`` sense key belongs to."""
    word, sep, index = key.rpartition("#")
    if not sep or not index.isdigit() or not word:
        raise ValidationError(f"not a sense key: {key!r}")
    return word


# ---------------------------------------------------------------------------
# binary paired-vector table
# ---------------------------------------------------------------------------


def write_paired_vectors(path, paired: PairedVectors) -> None:
    """Write a paired-vector table (little-endian binary, float64)."""
    src_dim = paired.source.dim
    tgt_dim = paired.target.dim
    with open(path, "wb") as handle:
        handle.write(_PAIRS_MAGIC)
        handle.write(struct.pack("<BIII", _PAIRS_VERSION, len(paired), src_dim, tgt_dim))
        for i, key in enumerate(paired.keys):
            encoded = key.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ValidationError(f"key too long to serialize: {key[:32]!r}...")
            handle.write(struct.pack("<H", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<Q", paired.counts[i]))
            handle.write(paired.source.vectors[i].astype("<f8").tobytes())
            handle.write(paired.target.vectors[i].astype("<f8").tobytes())


class _Cursor:
    """Bounds-checked reader over a bytes buffer."""

    def __init__(self, data: bytes, path) -> None:
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise DataFormatError(
                f"{self.path}: truncated file: needed {count} bytes for "
                f"{what} at byte offset {self.offset}"
            )
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_paired_vectors(path) -> PairedVectors:
    """Read a table written by :func:`write_paired_vectors`."""
    with open(path, "rb") as handle:
        data = handle.read()
    cursor = _Cursor(data, path)
    magic = cursor.take(4, "magic")
    if magic != _PAIRS_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {magic!r}; not a paired-vector table"
        )
    version, count, src_dim, tgt_dim = cursor.unpack("<BIII", "header")
    if version != _PAIRS_VERSION:
        raise DataFormatError(
            f"{path}: unsupported version {version} "
            f"(expected {_PAIRS_VERSION})"
        )
    if count < 1 or src_dim < 1 or tgt_dim < 1:
        raise DataFormatError(
            f"{path}: invalid header (count={count}, source dim={src_dim}, "
            f"target dim={tgt_dim})"
        )
    keys: list[str] = []
    counts: list[int] = []
    src = np.empty((count, src_dim), dtype=np.float64)
    tgt = np.empty((count, tgt_dim), dtype=np.float64)
    for i in range(count):
        (key_len,) = cursor.unpack("<H", f"key length of entry {i}")
        try:
            key = cursor.take(key_len, f"key of entry {i}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataFormatError(
                f"{path}: entry {i}: key is not valid UTF-8"
            ) from exc
        (occurrence_count,) = cursor.unpack("<Q", f"count of entry {i}")
        src[i] = np.frombuffer(
            cursor.take(8 * src_dim, f"source vector of entry {i}"), dtype="<f8"
        )
        tgt[i] = np.frombuffer(
            cursor.take(8 * tgt_dim, f"target vector of entry {i}"), dtype="<f8"
        )
        keys.append(key)
        counts.append(occurrence_count)
    if cursor.offset != len(data):
        raise DataFormatError(
            f"{path}: {len(data) - cursor.offset} trailing bytes after "
            f"{count} entries"
        )
    try:
        return PairedVectors(
            counts=tuple(counts),
            source=EmbeddingMatrix(words=tuple(keys), vectors=src, normalized=True),
            target=EmbeddingMatrix(words=tuple(keys), vectors=tgt, normalized=True),
        )
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
