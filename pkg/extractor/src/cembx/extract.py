"""Per-token contextual vector extraction from a masked language model.

The corpus side is a UTF-8 text file with one pre-tokenized sentence per
line (tokens separated by whitespace).  Every corpus token yields exactly
one output record, so stream sentence/token counts always equal corpus
counts.  A record carries a vector only when its token maps to exactly
one model vocabulary piece; multi-piece tokens, unknown tokens, and
tokens beyond the sentence/position limits are recorded as absent.  All
pieces of kept tokens — including pieces of multi-piece tokens — are fed
to the model, so absent tokens still contribute context.

Vectors are the mean of the configured hidden layers at the token's
piece position, scaled to unit Euclidean norm, stored as float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .writer import write_stream

__all__ = [
    "ExtractionConfig",
    "ExtractionError",
    "ExtractionSummary",
    "extract_file",
]

DEFAULT_LAYERS = (-4, -3, -2, -1)
DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_SENTENCE_LEN = 150


class ExtractionError(Exception):
    """Extraction could not proceed (bad config, model, or input)."""


@dataclass(frozen=True)
class ExtractionConfig:
    """What to extract with: model path/id, layers to pool, batching."""

    model: str
    layers: tuple[int, ...] = DEFAULT_LAYERS
    batch_size: int = DEFAULT_BATCH_SIZE
    max_sentence_len: int = DEFAULT_MAX_SENTENCE_LEN

    def __post_init__(self):
        if not self.model:
            raise ExtractionError("model identifier must be non-empty")
        if not self.layers:
            raise ExtractionError("at least one layer index is required")
        if self.batch_size < 1:
            raise ExtractionError(
                f"batch size must be >= 1, got {self.batch_size}"
            )
        if self.max_sentence_len < 1:
            raise ExtractionError(
                f"max sentence length must be >= 1, got "
                f"{self.max_sentence_len}"
            )


@dataclass
class ExtractionSummary:
    """Counts reported after a successful extraction."""

    sentences: int = 0
    tokens: int = 0
    present: int = 0
    dim: int = 0
    skipped_multi_piece: int = 0
    skipped_unknown: int = 0
    skipped_truncated: int = 0


@dataclass
class _PlannedSentence:
    """Wordpiece input for one line plus where each kept token sits."""

    raw_tokens: list[str]
    piece_ids: list[int] = field(default_factory=list)
    # (index into raw_tokens, piece position in [CLS] pieces [SEP]) for
    # every token that maps to exactly one known vocabulary piece.
    recorded: list[tuple[int, int]] = field(default_factory=list)


def _load_model(config: ExtractionConfig):
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer
        from transformers.utils import logging as hf_logging
    except ImportError as exc:  # pragma: no cover - environment issue
        raise ExtractionError(f"missing dependency: {exc}") from exc
    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model)
        model = AutoModel.from_pretrained(config.model)
    except Exception as exc:
        raise ExtractionError(
            f"could not load model {config.model!r}: {exc}"
        ) from exc
    model.eval()
    n_states = int(model.config.num_hidden_layers) + 1
    for layer in config.layers:
        if not -n_states <= layer < n_states:
            raise ExtractionError(
                f"layer index {layer} out of range for a model with "
                f"{n_states} hidden states"
            )
    return torch, tokenizer, model


def _plan_sentence(
    line: str,
    tokenizer,
    max_tokens: int,
    max_positions: int,
    summary: ExtractionSummary,
) -> _PlannedSentence:
    raw_tokens = line.split()
    plan = _PlannedSentence(raw_tokens=raw_tokens)
    unk = tokenizer.unk_token
    budget = max_positions - 2  # room for [CLS] and [SEP]
    for index, token in enumerate(raw_tokens):
        if index >= max_tokens:
            summary.skipped_truncated += len(raw_tokens) - index
            break
        pieces = tokenizer.tokenize(token)
        if len(plan.piece_ids) + len(pieces) > budget:
            summary.skipped_truncated += len(raw_tokens) - index
            break
        if len(pieces) == 1 and pieces[0] != unk:
            # Piece position 0 is [CLS]; the next piece appended lands
            # at len(piece_ids) + 1.
            plan.recorded.append((index, len(plan.piece_ids) + 1))
        elif len(pieces) == 1:
            summary.skipped_unknown += 1
        elif pieces:
            summary.skipped_multi_piece += 1
        else:
            summary.skipped_unknown += 1  # tokenizer produced nothing
        plan.piece_ids.extend(tokenizer.convert_tokens_to_ids(pieces))
    return plan


def extract_file(
    input_path: str | Path,
    output_path: str | Path,
    config: ExtractionConfig,
    progress: Callable[[str], None] | None = None,
) -> ExtractionSummary:
    """Extract vectors for one corpus side and write a CEMB stream."""
    input_path = Path(input_path)
    lines = input_path.read_text(encoding="utf-8").splitlines()
    torch, tokenizer, model = _load_model(config)
    max_positions = int(
        getattr(model.config, "max_position_embeddings", 512)
    )
    summary = ExtractionSummary(dim=int(model.config.hidden_size))

    plans = [
        _plan_sentence(
            line, tokenizer, config.max_sentence_len, max_positions, summary
        )
        for line in lines
    ]
    summary.sentences = len(plans)
    summary.tokens = sum(len(p.raw_tokens) for p in plans)

    cls_id = tokenizer.cls_token_id
    sep_id = tokenizer.sep_token_id
    pad_id = tokenizer.pad_token_id
    if cls_id is None or sep_id is None or pad_id is None:
        raise ExtractionError(
            "tokenizer must define [CLS], [SEP], and padding tokens"
        )

    sentences: list[list[tuple[str, np.ndarray | None]]] = []
    for start in range(0, len(plans), config.batch_size):
        batch = plans[start : start + config.batch_size]
        width = max((len(p.piece_ids) + 2 for p in batch), default=2)
        input_ids = torch.full(
            (len(batch), width), int(pad_id), dtype=torch.long
        )
        attention = torch.zeros((len(batch), width), dtype=torch.long)
        for b, plan in enumerate(batch):
            ids = [int(cls_id), *plan.piece_ids, int(sep_id)]
            input_ids[b, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention[b, : len(ids)] = 1
        with torch.no_grad():
            outputs = model(
                input_ids=input_ids,
                attention_mask=attention,
                output_hidden_states=True,
            )
        pooled = torch.stack(
            [outputs.hidden_states[layer] for layer in config.layers], dim=0
        ).mean(dim=0)
        for b, plan in enumerate(batch):
            vectors: dict[int, np.ndarray] = {}
            for token_index, piece_pos in plan.recorded:
                raw = pooled[b, piece_pos].numpy().astype(np.float64)
                norm = float(np.linalg.norm(raw))
                if norm == 0.0:
                    continue  # degenerate output: record as absent
                vectors[token_index] = (raw / norm).astype(np.float32)
            entries = [
                (token, vectors.get(i))
                for i, token in enumerate(plan.raw_tokens)
            ]
            summary.present += len(vectors)
            sentences.append(entries)
        if progress is not None:
            done = min(start + config.batch_size, len(plans))
            progress(f"extracted {done}/{len(plans)} sentences")

    write_stream(output_path, summary.dim, sentences)
    return summary
