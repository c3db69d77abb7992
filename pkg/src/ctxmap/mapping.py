"""Linear maps between embedding spaces.

Two fitters are provided, both trained on paired rows (row i of the
source array corresponds to row i of the target array):

* :func:`fit_procrustes` — the best *orthogonal* map, which preserves
  distances and angles in the source space.  Solved in closed form via
  the singular value decomposition of the cross-covariance matrix.
* :func:`fit_least_squares` — the unconstrained linear least-squares
  map, provided as a baseline.  It attains a residual no worse than the
  orthogonal map but can distort the source geometry arbitrarily.

Maps are applied to row vectors as ``rows @ W.T`` and can be saved to /
loaded from a plain-text format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, ValidationError

__all__ = [
    "MappingMatrix",
    "fit_procrustes",
    "fit_least_squares",
    "apply_mapping",
    "map_embeddings",
    "residual",
    "training_prefix",
    "write_mapping",
    "read_mapping",
]


@dataclass(frozen=True)
class MappingMatrix:
    """A linear map ``W`` applied to row vectors as ``rows @ W.T``.

    ``matrix`` has shape ``(output dim, input dim)``.  ``orthogonal``
    records whether the map was fitted under the orthogonality
    constraint (rows of ``W`` orthonormal whenever the output dimension
    does not exceed the input dimension).  ``n_pairs`` is the number of
    training pairs the map was fitted on (0 when unknown, e.g. after
    loading from a file written by another tool).
    """

    matrix: np.ndarray
    orthogonal: bool
    n_pairs: int = 0

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValidationError(
                f"mapping matrix must be 2-D, got {matrix.ndim}-D"
            )
        if matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValidationError(f"mapping matrix has empty shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("mapping matrix contains non-finite values")
        object.__setattr__(self, "matrix", matrix)

    @property
    def input_dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.matrix.shape[0])


def _paired_rows(x_rows, y_rows) -> tuple[np.ndarray, np.ndarray]:
    """Validate a pair of row-aligned 2-D float arrays."""
    x = np.asarray(x_rows, dtype=np.float64)
    y = np.asarray(y_rows, dtype=np.float64)
    for name, arr in (("source", x), ("target", y)):
        if arr.ndim != 2:
            raise ValidationError(f"{name} rows must be 2-D, got {arr.ndim}-D")
        if arr.shape[0] < 1:
            raise ValidationError(f"{name} rows are empty")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} rows contain non-finite values")
    if x.shape[0] != y.shape[0]:
        raise ValidationError(
            "paired training rows must have equal counts: "
            f"source has {x.shape[0]}, target has {y.shape[0]}"
        )
    return x, y


def fit_procrustes(x_rows, y_rows) -> MappingMatrix:
    """Fit the orthogonal map minimizing ``||x_rows @ W.T - y_rows||``.

    The solution is ``W = U @ Vt`` where ``U S Vt`` is the SVD of the
    cross-covariance matrix ``y_rows.T @ x_rows``.  Input and output
    dimensions may differ; the result is then semi-orthogonal.
    """
    x, y = _paired_rows(x_rows, y_rows)
    cross = y.T @ x
    u, _, vt = np.linalg.svd(cross, full_matrices=False)
    # Canonicalize SVD factor signs (largest-magnitude entry of each
    # left-singular vector made positive) so repeated fits on the same
    # data are bitwise identical across LAPACK drivers.
    anchor = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[anchor, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    vt = vt * signs[:, None]
    return MappingMatrix(matrix=u @ vt, orthogonal=True, n_pairs=x.shape[0])


def fit_least_squares(x_rows, y_rows) -> MappingMatrix:
    """Fit the unconstrained least-squares map (baseline).

    Uses the pseudoinverse, returning the minimum-norm solution when
    the system is underdetermined.
    """
    x, y = _paired_rows(x_rows, y_rows)
    w = (np.linalg.pinv(x) @ y).T
    return MappingMatrix(matrix=w, orthogonal=False, n_pairs=x.shape[0])


def apply_mapping(rows, mapping: MappingMatrix, renormalize: bool | None = None):
    """Map row vectors through ``mapping``; returns a new array.

    ``renormalize=None`` (the default) re-unit-normalizes the output
    rows only for non-orthogonal maps, which do not preserve norms.
    Pass ``True`` or ``False`` to force either behaviour.
    """
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"rows must be 2-D, got {x.ndim}-D")
    if x.shape[1] != mapping.input_dim:
        raise ValidationError(
            f"rows have dimension {x.shape[1]} but mapping expects "
            f"{mapping.input_dim}"
        )
    mapped = x @ mapping.matrix.T
    if renormalize is None:
        renormalize = not mapping.orthogonal
    if renormalize:
        norms = np.linalg.norm(mapped, axis=1)
        bad = np.nonzero(norms < 1e-15)[0]
        if bad.size:
            raise ValidationError(
                f"mapped row {int(bad[0])} has zero norm; cannot renormalize"
            )
        mapped = mapped / norms[:, None]
    return mapped


def map_embeddings(matrix, mapping: MappingMatrix, renormalize: bool | None = None):
    """Map an :class:`~ctxmap.corpus_io.EmbeddingMatrix` through ``mapping``."""
    from .corpus_io import EmbeddingMatrix

    mapped = apply_mapping(matrix.vectors, mapping, renormalize=renormalize)
    effective = renormalize if renormalize is not None else not mapping.orthogonal
    normalized = bool(effective) or (matrix.normalized and mapping.orthogonal)
    return EmbeddingMatrix(words=matrix.words, vectors=mapped, normalized=normalized)


def residual(x_rows, y_rows, mapping: MappingMatrix) -> float:
    """Root-mean-square entrywise residual of ``x_rows @ W.T`` against ``y_rows``."""
    x, y = _paired_rows(x_rows, y_rows)
    mapped = apply_mapping(x, mapping, renormalize=False)
    if mapped.shape != y.shape:
        raise ValidationError(
            f"mapped shape {mapped.shape} does not match target shape {y.shape}"
        )
    return float(np.sqrt(np.mean((mapped - y) ** 2)))


def training_prefix(x_rows, y_rows, size: int) -> tuple[np.ndarray, np.ndarray]:
    """First ``size`` row pairs, for training on the most frequent items.

    Callers order their pairs most-frequent-first, so a prefix acts as a
    frequency cutoff.
    """
    x, y = _paired_rows(x_rows, y_rows)
    if size < 1:
        raise ValidationError(f"training prefix size must be >= 1, got {size}")
    if size > x.shape[0]:
        raise ValidationError(
            f"training prefix size {size} exceeds available pairs {x.shape[0]}"
        )
    return x[:size], y[:size]


def write_mapping(path, mapping: MappingMatrix) -> None:
    """Write a map as text: a header line, then one row per line."""
    lines = [
        f"{mapping.output_dim} {mapping.input_dim} "
        f"orthogonal={1 if mapping.orthogonal else 0} pairs={mapping.n_pairs}"
    ]
    for row in mapping.matrix:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_mapping(path) -> MappingMatrix:
    """Read a map written by :func:`write_mapping`."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].strip():
        raise DataFormatError(f"{path}: missing header line")
    header = lines[0].split()
    if len(header) != 4:
        raise DataFormatError(
            f"{path}: line 1: expected 4 header fields, got {len(header)}"
        )
    try:
        out_dim = int(header[0])
        in_dim = int(header[1])
    except ValueError:
        raise DataFormatError(f"{path}: line 1: non-integer dimensions") from None
    if out_dim < 1 or in_dim < 1:
        raise DataFormatError(f"{path}: line 1: dimensions must be positive")
    flags = {}
    for field in header[2:]:
        key, _, value = field.partition("=")
        flags[key] = value
    if sorted(flags) != ["orthogonal", "pairs"]:
        raise DataFormatError(
            f"{path}: line 1: expected 'orthogonal=' and 'pairs=' fields"
        )
    if flags["orthogonal"] not in ("0", "1"):
        raise DataFormatError(
            f"{path}: line 1: orthogonal flag must be 0 or 1, "
            f"got {flags['orthogonal']!r}"
        )
    try:
        n_pairs = int(flags["pairs"])
    except ValueError:
        raise DataFormatError(f"{path}: line 1: non-integer pair count") from None
    body = lines[1:]
    if len(body) < out_dim:
        raise DataFormatError(
            f"{path}: expected {out_dim} matrix rows, found {len(body)}"
        )
    if any(line.strip() for line in body[out_dim:]):
        raise DataFormatError(f"{path}: trailing content after {out_dim} matrix rows")
    rows = np.empty((out_dim, in_dim), dtype=np.float64)
    for i, line in enumerate(body[:out_dim]):
        fields = line.split()
        if len(fields) != in_dim:
            raise DataFormatError(
                f"{path}: line {i + 2}: expected {in_dim} values, got {len(fields)}"
            )
        try:
            rows[i] = [float(f) for f in fields]
        except ValueError:
            raise DataFormatError(
                f"{path}: line {i + 2}: non-numeric matrix value"
            ) from None
    try:
        return MappingMatrix(
            matrix=rows, orthogonal=flags["orthogonal"] == "1", n_pairs=n_pairs
        )
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
