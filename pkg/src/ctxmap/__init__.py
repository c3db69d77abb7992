"""Cross-lingual mapping of contextual type embeddings without seed dictionaries.

The package covers the full desk-scale workflow: word alignment over a
parallel corpus, silver pair extraction from per-token embedding streams,
type- and sense-level representation building, linear/orthogonal mapping,
nearest-neighbour and CSLS retrieval evaluation, and geometric diagnostics
(isotropy, isometry, relational similarity) with iterative normalization.
"""

from ctxmap.errors import CtxmapError, DataFormatError, StageError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "CtxmapError",
    "DataFormatError",
    "ValidationError",
    "StageError",
    "__version__",
]
