"""Writer for the CEMB token-embedding stream format.

Layout (all integers little-endian): magic ``CEMB``; u32 version (1);
u32 vector dimension; u32 sentence count; then per sentence a u32 token
count followed by per-token records: u16 UTF-8 byte length, the token
bytes, u8 presence flag, and — when present — ``dim`` float32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CEMB_MAGIC = b"CEMB"
CEMB_VERSION = 1

# One sentence is a sequence of (token, vector-or-None) pairs.
TokenEntry = tuple[str, "np.ndarray | None"]


class StreamWriteError(ValueError):
    """A sentence or token violates the stream format constraints."""


def write_stream(
    path: str | Path, dim: int, sentences: Iterable[Sequence[TokenEntry]]
) -> tuple[int, int]:
    """Write sentences of (token, vector|None) pairs; return counts.

    Returns ``(n_sentences, n_present)``.  Vectors are serialized as
    float32 regardless of input dtype; ``None`` marks an absent token.
    """
    if dim < 1:
        raise StreamWriteError(f"vector dimension must be >= 1, got {dim}")
    materialized = [list(sentence) for sentence in sentences]
    n_present = 0
    with open(path, "wb") as handle:
        handle.write(CEMB_MAGIC)
        handle.write(struct.pack("<III", CEMB_VERSION, dim, len(materialized)))
        for s, sentence in enumerate(materialized):
            handle.write(struct.pack("<I", len(sentence)))
            for t, (token, vector) in enumerate(sentence):
                if not token or token.split() != [token]:
                    raise StreamWriteError(
                        f"sentence {s} token {t}: token is empty or "
                        f"contains whitespace: {token!r}"
                    )
                token_bytes = token.encode("utf-8")
                if len(token_bytes) > 0xFFFF:
                    raise StreamWriteError(
                        f"sentence {s} token {t}: token longer than "
                        "65535 bytes"
                    )
                handle.write(struct.pack("<H", len(token_bytes)))
                handle.write(token_bytes)
                if vector is None:
                    handle.write(struct.pack("<B", 0))
                    continue
                values = np.asarray(vector, dtype="<f4")
                if values.shape != (dim,):
                    raise StreamWriteError(
                        f"sentence {s} token {t}: vector shape "
                        f"{values.shape} does not match dimension {dim}"
                    )
                if not np.all(np.isfinite(values)):
                    raise StreamWriteError(
                        f"sentence {s} token {t}: non-finite vector value"
                    )
                handle.write(struct.pack("<B", 1))
                handle.write(values.tobytes())
                n_present += 1
    return len(materialized), n_present
