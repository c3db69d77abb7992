"""cembx: dump per-token contextual vectors to CEMB binary streams.

The package wraps a pretrained masked-language model (BERT-style) and
writes one stream sentence per corpus line with one record per
whitespace token.  A token receives a vector — the mean of the
configured hidden layers, scaled to unit length — only when it maps to
exactly one model vocabulary piece; multi-piece and unknown tokens are
recorded as absent so downstream consumers can skip them.
"""

from .extract import ExtractionConfig, ExtractionError, extract_file
from .writer import write_stream

__all__ = [
    "ExtractionConfig",
    "ExtractionError",
    "extract_file",
    "write_stream",
]

__version__ = "0.1.0"
