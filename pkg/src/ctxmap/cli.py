"""Command-line interface.

Exit codes: 0 success, 1 runtime failure (bad data, failed stage),
2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .aligner import align_corpus, read_alignments, write_alignments
from .corpus_io import (
    DEFAULT_MAX_SENTENCE_LEN,
    iter_sides,
    load_dictionary,
    load_parallel_corpus,
    load_stopwords,
    read_embeddings,
    read_token_stream,
    write_embeddings,
)
from .errors import CtxmapError
from .geometry import (
    DEFAULT_ISOTROPY_SAMPLE,
    DEFAULT_RELATIONAL_PAIRS,
    geometry_report,
)
from .mapping import (
    fit_least_squares,
    fit_procrustes,
    map_embeddings,
    read_mapping,
    residual,
    training_prefix,
    write_mapping,
)
from .normalize import DEFAULT_MAX_ITERS, DEFAULT_MEAN_TOL, iterative_normalize
from .pipeline import MAPPING_METHODS, PipelineConfig, run_pipeline
from .representations import (
    DEFAULT_KNEE_SENSITIVITY,
    DEFAULT_MAX_SENSES,
    DEFAULT_MIN_COUNT,
    DEFAULT_OCCURRENCE_CAP,
    DEFAULT_SENSE_MIN_COUNT,
    build_type_level,
    build_vocab_matrix,
    cluster_senses,
    collect_occurrences,
    read_paired_vectors,
    write_paired_vectors,
)
from .retrieval import DEFAULT_NEIGHBORHOOD, evaluate_bdi

__all__ = ["main"]


def _add_corpus_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--source-text", required=True, help="tokenized source sentences, one per line")
    parser.add_argument("--target-text", required=True, help="tokenized target sentences, one per line")
    parser.add_argument(
        "--max-sentence-len",
        type=int,
        default=DEFAULT_MAX_SENTENCE_LEN,
        help="truncate sentences to this many tokens (default %(default)s)",
    )


def cmd_run(args) -> int:
    config = PipelineConfig.from_file(args.config)
    result = run_pipeline(config, progress=print)
    for method, report in sorted(result.evaluation.items()):
        precisions = " ".join(
            f"P@{k}={v:.2f}" for k, v in sorted(
                ((int(k), v) for k, v in report["precision_at"].items())
            )
        )
        print(f"{method}: {precisions} (evaluated {report['evaluated']})")
    print(f"manifest: {result.manifest_path}")
    return 0


def cmd_align(args) -> int:
    corpus = load_parallel_corpus(
        args.source_text, args.target_text, args.max_sentence_len
    )
    alignments, _, _ = align_corpus(
        corpus,
        epochs=args.epochs,
        diagonal_tension=args.diagonal_tension,
        null_mass=args.null_mass,
    )
    write_alignments(alignments, args.output)
    links = sum(len(a.links) for a in alignments)
    print(f"wrote {args.output}: {links} links over {len(alignments)} sentences")
    return 0


def cmd_extract_pairs(args) -> int:
    corpus = load_parallel_corpus(
        args.source_text, args.target_text, args.max_sentence_len
    )
    alignments = read_alignments(args.alignments)
    source_stream = read_token_stream(args.source_embeddings)
    target_stream = read_token_stream(args.target_embeddings)
    occurrences = collect_occurrences(
        corpus,
        alignments,
        source_stream,
        target_stream,
        seed=args.seed,
        cap=args.cap,
        min_count=args.min_count,
    )
    type_pairs = build_type_level(occurrences)
    write_paired_vectors(args.output, type_pairs)
    print(f"wrote {args.output}: {len(type_pairs)} anchor pairs")
    if args.senses_output:
        stopwords = (
            load_stopwords(args.stopwords) if args.stopwords else frozenset()
        )
        senses = cluster_senses(
            occurrences,
            stopwords=stopwords,
            seed=args.seed,
            sense_min_count=args.sense_min_count,
            max_senses=args.max_senses,
            sensitivity=args.knee_sensitivity,
        )
        write_paired_vectors(args.senses_output, senses)
        print(f"wrote {args.senses_output}: {len(senses)} sense keys")
    if args.vocab_output:
        _, tgt_sents = iter_sides(corpus)
        vocab = build_vocab_matrix(
            tgt_sents,
            target_stream,
            seed=args.seed,
            cap=args.cap,
            min_count=args.min_count,
            name="target vocabulary",
        )
        write_embeddings(vocab, args.vocab_output)
        print(f"wrote {args.vocab_output}: {len(vocab)} types")
    return 0


def cmd_normalize(args) -> int:
    matrix = read_embeddings(args.input)
    normalized, report = iterative_normalize(matrix, args.max_iters, args.tol)
    write_embeddings(normalized, args.output)
    print(
        f"wrote {args.output}: {report.iterations} iterations, "
        f"final mean norm {report.final_mean_norm:.3g}"
    )
    return 0


def cmd_map(args) -> int:
    pairs = read_paired_vectors(args.pairs)
    size = args.train_size if args.train_size > 0 else len(pairs)
    x_train, y_train = training_prefix(
        pairs.source.vectors, pairs.target.vectors, size
    )
    fitter = fit_procrustes if args.method == "procrustes" else fit_least_squares
    mapping = fitter(x_train, y_train)
    write_mapping(args.output, mapping)
    print(
        f"wrote {args.output}: {args.method} on {size} pairs, "
        f"residual {residual(x_train, y_train, mapping):.6f}"
    )
    return 0


def cmd_evaluate(args) -> int:
    pairs = read_paired_vectors(args.pairs)
    vocab = read_embeddings(args.target_vocab, normalized=True)
    mapping = read_mapping(args.mapping)
    dictionary = load_dictionary(args.dictionary)
    mapped = map_embeddings(pairs.source, mapping)
    k_values = tuple(int(k) for k in args.k.split(","))
    results = {}
    for method in args.methods.split(","):
        report = evaluate_bdi(
            mapped,
            vocab,
            dictionary,
            method=method.strip(),
            k_values=k_values,
            neighborhood=args.neighborhood,
        )
        results[method.strip()] = {
            "precision_at": {str(k): v for k, v in report.precision_at.items()},
            "evaluated": report.evaluated,
            "skipped_source_oov": report.skipped_source_oov,
            "skipped_target_oov": report.skipped_target_oov,
            "neighborhood": report.neighborhood,
        }
        print(" ".join(report.lines()))
    if args.output:
        Path(args.output).write_text(
            json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.output}")
    return 0


def cmd_metrics(args) -> int:
    pairs = read_paired_vectors(args.pairs)
    n = len(pairs)
    report = geometry_report(
        pairs.source,
        pairs.target,
        r=min(args.sample, n),
        pair_count=min(args.pair_count, n),
        seed=args.seed,
    )
    print(report.table_row())
    if args.output:
        Path(args.output).write_text(
            json.dumps(
                {
                    "isotropy_source": report.isotropy_source,
                    "isotropy_target": report.isotropy_target,
                    "isometry_defect": report.isometry_defect,
                    "relational_similarity": report.relational_similarity,
                    "sample_size": report.sample_size,
                    "pair_count": report.pair_count,
                    "seed": report.seed,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxmap",
        description=(
            "Dictionary-free cross-lingual embedding alignment: word-align a "
            "parallel corpus, average contextual vectors into anchor pairs, "
            "fit an orthogonal map, and evaluate dictionary induction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("-c", "--config", required=True, help="key = value config file")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("align", help="word-align a sentence-aligned corpus")
    _add_corpus_arguments(p)
    p.add_argument("--output", required=True, help="alignment file to write")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--diagonal-tension", type=float, default=4.0)
    p.add_argument("--null-mass", type=float, default=0.08)
    p.set_defaults(handler=cmd_align)

    p = sub.add_parser(
        "extract-pairs",
        help="collect aligned occurrences and write anchor-pair tables",
    )
    _add_corpus_arguments(p)
    p.add_argument("--alignments", required=True)
    p.add_argument("--source-embeddings", required=True, help="token stream (binary)")
    p.add_argument("--target-embeddings", required=True, help="token stream (binary)")
    p.add_argument("--output", required=True, help="type-level pair table to write")
    p.add_argument("--senses-output", help="also write a sense-level pair table")
    p.add_argument("--vocab-output", help="also write the target vocabulary matrix")
    p.add_argument("--stopwords", help="words never split into senses")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=DEFAULT_OCCURRENCE_CAP)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--sense-min-count", type=int, default=DEFAULT_SENSE_MIN_COUNT)
    p.add_argument("--max-senses", type=int, default=DEFAULT_MAX_SENSES)
    p.add_argument(
        "--knee-sensitivity", type=float, default=DEFAULT_KNEE_SENSITIVITY
    )
    p.set_defaults(handler=cmd_extract_pairs)

    p = sub.add_parser("normalize", help="iteratively center a text matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--tol", type=float, default=DEFAULT_MEAN_TOL)
    p.set_defaults(handler=cmd_normalize)

    p = sub.add_parser("map", help="fit a linear map on an anchor-pair table")
    p.add_argument("--pairs", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=MAPPING_METHODS, default="procrustes")
    p.add_argument(
        "--train-size",
        type=int,
        default=0,
        help="train on the first N (most frequent) pairs; 0 = all",
    )
    p.set_defaults(handler=cmd_map)

    p = sub.add_parser(
        "evaluate", help="score dictionary induction through a fitted map"
    )
    p.add_argument("--pairs", required=True, help="anchor pairs (source side used)")
    p.add_argument("--mapping", required=True)
    p.add_argument("--target-vocab", required=True, help="text matrix to retrieve from")
    p.add_argument("--dictionary", required=True, help="reference word pairs")
    p.add_argument("--methods", default="nn,csls")
    p.add_argument("--k", default="1,5,10")
    p.add_argument("--neighborhood", type=int, default=DEFAULT_NEIGHBORHOOD)
    p.add_argument("--output", help="also write the reports as JSON")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser(
        "metrics", help="geometry diagnostics of an anchor-pair table"
    )
    p.add_argument("--pairs", required=True)
    p.add_argument("--sample", type=int, default=DEFAULT_ISOTROPY_SAMPLE)
    p.add_argument("--pair-count", type=int, default=DEFAULT_RELATIONAL_PAIRS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="also write the report as JSON")
    p.set_defaults(handler=cmd_metrics)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (CtxmapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
