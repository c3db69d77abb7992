"""Loading, validation, and serialization of corpora, dictionaries, and embeddings.

Four kinds of on-disk data are handled here:

* parallel corpora: two plain-text files, one whitespace-tokenized sentence
  per line, line i of each file forming a sentence pair;
* bilingual dictionaries: one ``source target`` pair per line, where a source
  word may appear on several lines (polysemous entries);
* embedding matrices: word2vec text layout, ``N d`` header followed by
  ``word v1 .. vd`` rows;
* per-token embedding streams: the little-endian binary layout documented in
  :func:`read_token_stream` (magic ``CEMB``), carrying one record per corpus
  token with an optional unit vector.

Loaded objects are immutable after construction and safe to share between
threads; all validation happens eagerly at load time.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ctxmap.errors import DataFormatError, ValidationError

CEMB_MAGIC = b"CEMB"
CEMB_VERSION = 1

#: Sentences longer than this many tokens are truncated on load.
DEFAULT_MAX_SENTENCE_LEN = 150

#: Row norms of a matrix with the ``normalized`` flag may deviate from 1 by
#: at most this much.
UNIT_NORM_TOL = 1e-6


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParallelCorpus:
    """Sentence-aligned corpus; each pair is (source tokens, target tokens)."""

    pairs: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class BilingualDictionary:
    """Ordered (source, target) entries; a source may have several targets."""

    entries: tuple[tuple[str, str], ...]

    @cached_property
    def _by_source(self) -> dict[str, tuple[str, ...]]:
        grouped: dict[str, list[str]] = {}
        for src, tgt in self.entries:
            grouped.setdefault(src, []).append(tgt)
        return {s: tuple(ts) for s, ts in grouped.items()}

    def targets_for(self, source: str) -> tuple[str, ...]:
        return self._by_source.get(source, ())

    def source_words(self) -> tuple[str, ...]:
        return tuple(self._by_source.keys())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A vocabulary plus one row vector per word.

    ``vectors`` has shape (len(words), dim) and dtype float64.  When
    ``normalized`` is set, every row has unit Euclidean norm within 1e-6;
    this is validated at construction time.
    """

    words: tuple[str, ...]
    vectors: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2:
            raise ValidationError(
                f"embedding matrix must be 2-dimensional, got shape {vectors.shape}"
            )
        if len(self.words) != vectors.shape[0]:
            raise ValidationError(
                f"word count {len(self.words)} does not match row count {vectors.shape[0]}"
            )
        if len(set(self.words)) != len(self.words):
            seen: set[str] = set()
            dup = next(w for w in self.words if w in seen or seen.add(w))
            raise ValidationError(f"duplicate word in embedding matrix: {dup!r}")
        for word in self.words:
            if not word or word.split() != [word]:
                raise ValidationError(f"word contains whitespace or is empty: {word!r}")
        if not np.all(np.isfinite(vectors)):
            row = int(np.argwhere(~np.isfinite(vectors).all(axis=1)).ravel()[0])
            raise ValidationError(
                f"non-finite value in embedding row {row} ({self.words[row]!r})"
            )
        if self.normalized and len(self.words) > 0:
            norms = np.linalg.norm(vectors, axis=1)
            worst = int(np.argmax(np.abs(norms - 1.0)))
            if abs(norms[worst] - 1.0) > UNIT_NORM_TOL:
                raise ValidationError(
                    f"matrix flagged normalized but row {worst} "
                    f"({self.words[worst]!r}) has norm {norms[worst]!r}"
                )

    @cached_property
    def _index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def index_of(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise KeyError(f"word not in matrix: {word!r}") from None

    def row(self, word: str) -> np.ndarray:
        return self.vectors[self.index_of(word)]


@dataclass(frozen=True)
class TokenRecord:
    """One corpus token; ``vector`` is None when no embedding is present."""

    token: str
    vector: np.ndarray | None = None

    @property
    def present(self) -> bool:
        return self.vector is not None


@dataclass(frozen=True)
class TokenEmbeddingStream:
    """Per-token embedding records, one tuple of records per sentence."""

    dim: int
    sentences: tuple[tuple[TokenRecord, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"stream dimension must be >= 1, got {self.dim}")
        for s, sentence in enumerate(self.sentences):
            for t, record in enumerate(sentence):
                if record.vector is not None and record.vector.shape != (self.dim,):
                    raise ValidationError(
                        f"sentence {s} token {t}: vector shape {record.vector.shape} "
                        f"does not match stream dimension {self.dim}"
                    )

    def __len__(self) -> int:
        return len(self.sentences)


# ---------------------------------------------------------------------------
# parallel corpus
# ---------------------------------------------------------------------------


def _read_tokenized_lines(path: str | Path) -> list[tuple[str, ...]]:
    lines: list[tuple[str, ...]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            tokens = tuple(raw.split())
            if not tokens:
                raise DataFormatError(f"{path}: empty sentence at line {lineno}")
            lines.append(tokens)
    return lines


def load_parallel_corpus(
    source_path: str | Path,
    target_path: str | Path,
    max_len: int = DEFAULT_MAX_SENTENCE_LEN,
) -> ParallelCorpus:
    """Load a sentence-aligned corpus from two one-sentence-per-line files.

    Sentences longer than ``max_len`` tokens are truncated to the first
    ``max_len`` tokens.  Mismatched line counts and empty lines are errors.
    """
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    source = _read_tokenized_lines(source_path)
    target = _read_tokenized_lines(target_path)
    if len(source) != len(target):
        raise DataFormatError(
            f"sentence count mismatch: {source_path} has {len(source)} lines, "
            f"{target_path} has {len(target)} lines"
        )
    pairs = tuple(
        (src[:max_len], tgt[:max_len]) for src, tgt in zip(source, target)
    )
    return ParallelCorpus(pairs=pairs)


# ---------------------------------------------------------------------------
# bilingual dictionary
# ---------------------------------------------------------------------------


def load_dictionary(path: str | Path) -> BilingualDictionary:
    """Load ``source target`` pairs; duplicates collapse to first occurrence."""
    entries: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                raise DataFormatError(f"{path}: empty line {lineno} in dictionary")
            fields = raw.split()
            if len(fields) != 2:
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected 2"
                )
            pair = (fields[0], fields[1])
            if pair not in seen:
                seen.add(pair)
                entries.append(pair)
    if not entries:
        raise DataFormatError(f"{path}: dictionary is empty")
    return BilingualDictionary(entries=tuple(entries))


def write_dictionary(dictionary: BilingualDictionary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for src, tgt in dictionary.entries:
            handle.write(f"{src} {tgt}\n")


# ---------------------------------------------------------------------------
# embedding text format
# ---------------------------------------------------------------------------


def read_embeddings(path: str | Path, normalized: bool = False) -> EmbeddingMatrix:
    """Read a word2vec-style text matrix: ``N d`` header then one row per word."""
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline()
        fields = header.split()
        if len(fields) != 2:
            raise DataFormatError(
                f"{path}: header must be 'N d', got {header.strip()!r}"
            )
        try:
            count, dim = int(fields[0]), int(fields[1])
        except ValueError:
            raise DataFormatError(
                f"{path}: non-integer header fields {header.strip()!r}"
            ) from None
        if count < 0 or dim < 1:
            raise DataFormatError(f"{path}: invalid header N={count} d={dim}")
        words: list[str] = []
        rows = np.empty((count, dim), dtype=np.float64)
        for i in range(count):
            lineno = i + 2
            raw = handle.readline()
            if not raw:
                raise DataFormatError(
                    f"{path}: expected {count} rows, file ends after {i}"
                )
            parts = raw.split()
            if len(parts) != dim + 1:
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(parts) - 1} values, expected {dim}"
                )
            words.append(parts[0])
            try:
                rows[i] = [float(v) for v in parts[1:]]
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno} contains a non-numeric value"
                ) from None
        extra = handle.readline()
        if extra.strip():
            raise DataFormatError(f"{path}: trailing data after {count} rows")
    try:
        return EmbeddingMatrix(words=tuple(words), vectors=rows, normalized=normalized)
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the text layout with enough digits for 1e-6-relative round-trips."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(matrix)} {matrix.dim}\n")
        for word, row in zip(matrix.words, matrix.vectors):
            values = " ".join(f"{v:.12g}" for v in row)
            handle.write(f"{word} {values}\n")


# ---------------------------------------------------------------------------
# per-token embedding stream (binary)
# ---------------------------------------------------------------------------


def write_token_stream(stream: TokenEmbeddingStream, path: str | Path) -> None:
    """Serialize a stream to the ``CEMB`` little-endian binary layout."""
    with open(path, "wb") as handle:
        handle.write(CEMB_MAGIC)
        handle.write(struct.pack("<III", CEMB_VERSION, stream.dim, len(stream.sentences)))
        for s, sentence in enumerate(stream.sentences):
            handle.write(struct.pack("<I", len(sentence)))
            for t, record in enumerate(sentence):
                token_bytes = record.token.encode("utf-8")
                if not record.token or record.token.split() != [record.token]:
                    raise ValidationError(
                        f"sentence {s} token {t}: token is empty or contains "
                        f"whitespace: {record.token!r}"
                    )
                if len(token_bytes) > 0xFFFF:
                    raise ValidationError(
                        f"sentence {s} token {t}: token longer than 65535 bytes"
                    )
                handle.write(struct.pack("<H", len(token_bytes)))
                handle.write(token_bytes)
                if record.vector is None:
                    handle.write(struct.pack("<B", 0))
                else:
                    vector = np.asarray(record.vector, dtype="<f4")
                    if vector.shape != (stream.dim,):
                        raise ValidationError(
                            f"sentence {s} token {t}: vector dimension "
                            f"{vector.shape} does not match stream dimension {stream.dim}"
                        )
                    if not np.all(np.isfinite(vector)):
                        raise ValidationError(
                            f"sentence {s} token {t}: non-finite vector value"
                        )
                    handle.write(struct.pack("<B", 1))
                    handle.write(vector.tobytes())


class _StreamParser:
    """Cursor over the raw bytes, reporting offsets in truncation errors."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise DataFormatError(
                f"{self.path}: truncated stream, needed {n} bytes for {what} "
                f"at byte offset {self.offset}, file has {len(self.data)} bytes"
            )
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def read_token_stream(path: str | Path) -> TokenEmbeddingStream:
    """Parse a ``CEMB`` binary stream.

    Layout (all integers little-endian): magic ``CEMB``; u32 version (must be
    1); u32 dim; u32 sentence count; then per sentence a u32 token count and
    per token a u16 UTF-8 byte length, the token bytes, a u8 presence flag,
    and — when the flag is 1 — dim float32 values.
    """
    data = Path(path).read_bytes()
    parser = _StreamParser(data, str(path))
    magic = parser.take(4, "magic")
    if magic != CEMB_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {magic!r}, expected {CEMB_MAGIC!r}"
        )
    version = parser.u32("version")
    if version != CEMB_VERSION:
        raise DataFormatError(
            f"{path}: unsupported stream version {version}, expected {CEMB_VERSION}"
        )
    dim = parser.u32("dimension")
    if dim < 1:
        raise DataFormatError(f"{path}: stream dimension must be >= 1, got {dim}")
    sentence_count = parser.u32("sentence count")
    vector_bytes = 4 * dim
    sentences: list[tuple[TokenRecord, ...]] = []
    for s in range(sentence_count):
        token_count = parser.u32(f"token count of sentence {s}")
        records: list[TokenRecord] = []
        for t in range(token_count):
            token_len = parser.u16(f"token length (sentence {s}, token {t})")
            raw_token = parser.take(token_len, f"token bytes (sentence {s}, token {t})")
            try:
                token = raw_token.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DataFormatError(
                    f"{path}: invalid UTF-8 in token (sentence {s}, token {t}): {exc}"
                ) from exc
            presence = parser.u8(f"presence flag (sentence {s}, token {t})")
            if presence not in (0, 1):
                raise DataFormatError(
                    f"{path}: presence flag must be 0 or 1, got {presence} "
                    f"(sentence {s}, token {t})"
                )
            vector = None
            if presence == 1:
                raw_vec = parser.take(vector_bytes, f"vector (sentence {s}, token {t})")
                vector = np.frombuffer(raw_vec, dtype="<f4").copy()
            records.append(TokenRecord(token=token, vector=vector))
        sentences.append(tuple(records))
    if parser.offset != len(data):
        raise DataFormatError(
            f"{path}: {len(data) - parser.offset} trailing bytes after the "
            f"final record (offset {parser.offset})"
        )
    return TokenEmbeddingStream(dim=dim, sentences=tuple(sentences))


def validate_stream_against_corpus(
    stream: TokenEmbeddingStream,
    sentences: Sequence[Sequence[str]],
    name: str = "stream",
) -> None:
    """Check that a stream covers a tokenized corpus side.

    The stream must have the same number of sentences, and each stream
    sentence must carry at least as many records as the (possibly truncated)
    corpus sentence, with matching token strings over the shared prefix.
    """
    if len(stream.sentences) != len(sentences):
        raise ValidationError(
            f"{name}: stream has {len(stream.sentences)} sentences, "
            f"corpus has {len(sentences)}"
        )
    for s, (records, tokens) in enumerate(zip(stream.sentences, sentences)):
        if len(records) < len(tokens):
            raise ValidationError(
                f"{name}: sentence {s} has {len(records)} stream records "
                f"but {len(tokens)} corpus tokens"
            )
        for t, token in enumerate(tokens):
            if records[t].token != token:
                raise ValidationError(
                    f"{name}: sentence {s} token {t} mismatch: stream has "
                    f"{records[t].token!r}, corpus has {token!r}"
                )


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-word-per-line stopword list; blank lines are ignored."""
    words: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            word = raw.strip()
            if word:
                words.add(word)
    return frozenset(words)


def iter_sides(corpus: ParallelCorpus) -> tuple[list[tuple[str, ...]], list[tuple[str, ...]]]:
    """Split a corpus into its source and target sentence lists."""
    source = [pair[0] for pair in corpus.pairs]
    target = [pair[1] for pair in corpus.pairs]
    return source, target


def digest_file(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def normalize_rows(vectors: np.ndarray, what: str = "matrix", keys: Iterable[str] | None = None) -> np.ndarray:
    """Return a row-normalized copy; raises naming the offending row/key."""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        idx = int(np.argwhere(norms == 0.0).ravel()[0])
        label = list(keys)[idx] if keys is not None else idx
        raise ValidationError(f"{what}: zero-norm row at {label!r}")
    return vectors / norms[:, None]
