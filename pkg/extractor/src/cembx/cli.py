"""Command-line entry point: ``extract`` writes a CEMB stream."""

from __future__ import annotations

import argparse
import sys

from .extract import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LAYERS,
    DEFAULT_MAX_SENTENCE_LEN,
    ExtractionConfig,
    ExtractionError,
    extract_file,
)


def _parse_layers(value: str) -> tuple[int, ...]:
    try:
        layers = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"layers must be a comma-separated integer list, got {value!r}"
        ) from exc
    if not layers:
        raise argparse.ArgumentTypeError("at least one layer index required")
    return layers


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description=(
            "Extract per-token contextual vectors from a pretrained "
            "masked-language model and write them as a CEMB binary "
            "stream: one sentence per input line, one record per "
            "whitespace token, vectors only for tokens that are a single "
            "known vocabulary piece."
        ),
    )
    parser.add_argument(
        "--model", required=True, help="model directory or hub identifier"
    )
    parser.add_argument(
        "--input", required=True, help="pre-tokenized text, one sentence per line"
    )
    parser.add_argument("--output", required=True, help="CEMB file to write")
    parser.add_argument(
        "--layers",
        type=_parse_layers,
        default=DEFAULT_LAYERS,
        help=(
            "comma-separated hidden-state indices to average "
            "(default %(default)s; pass negative lists as --layers=-4,-3,-2,-1)"
        ),
    )
    parser.add_argument(
        "--batch", type=int, default=DEFAULT_BATCH_SIZE, help="sentences per forward pass"
    )
    parser.add_argument(
        "--max-len",
        type=int,
        default=DEFAULT_MAX_SENTENCE_LEN,
        help="tokens beyond this per-sentence limit are recorded as absent",
    )
    parser.add_argument(
        "--quiet", action="store_true", help="suppress progress lines"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExtractionConfig(
            model=args.model,
            layers=tuple(args.layers),
            batch_size=args.batch,
            max_sentence_len=args.max_len,
        )
        summary = extract_file(
            args.input,
            args.output,
            config,
            progress=None if args.quiet else print,
        )
    except (ExtractionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {args.output}: {summary.sentences} sentences, "
        f"{summary.present}/{summary.tokens} tokens with vectors "
        f"(dim {summary.dim}; skipped: {summary.skipped_multi_piece} "
        f"multi-piece, {summary.skipped_unknown} unknown, "
        f"{summary.skipped_truncated} truncated)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
