"""Tests for the command-line interface."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ctxmap.cli import main

FIXTURE = Path(__file__).parent / "fixtures" / "toy"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_no_arguments_exits_with_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_unknown_subcommand_exits_with_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_runtime_errors_print_message_and_exit_1(tmp_path, capsys):
    code, out, err = run_cli(
        capsys,
        "normalize",
        "--input", tmp_path / "does_not_exist.txt",
        "--output", tmp_path / "out.txt",
    )
    assert code == 1
    assert err.startswith("error:")


def test_run_executes_pipeline_from_config(tmp_path, capsys):
    config = tmp_path / "run.cfg"
    config.write_text(
        f"source_text = {FIXTURE / 'source.txt'}\n"
        f"target_text = {FIXTURE / 'target.txt'}\n"
        f"source_embeddings = {FIXTURE / 'source.cemb'}\n"
        f"target_embeddings = {FIXTURE / 'target.cemb'}\n"
        f"eval_dictionary = {FIXTURE / 'dict.txt'}\n"
        f"output_dir = {tmp_path / 'out'}\n"
        "seed = 7\n",
        encoding="utf-8",
    )
    code, out, err = run_cli(capsys, "run", "-c", config)
    assert code == 0
    assert "csls: P@1=100.00" in out
    assert "nn: P@1=100.00" in out
    assert "manifest:" in out
    assert (tmp_path / "out" / "manifest.json").is_file()


def test_stepwise_commands_reproduce_the_pipeline(tmp_path, capsys):
    """align -> extract-pairs -> map -> evaluate -> metrics, no config file."""
    alignments = tmp_path / "alignments.txt"
    code, out, _ = run_cli(
        capsys,
        "align",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--output", alignments,
    )
    assert code == 0
    assert "links over 240 sentences" in out

    pairs = tmp_path / "pairs.bin"
    senses = tmp_path / "senses.bin"
    vocab = tmp_path / "vocab.txt"
    code, out, _ = run_cli(
        capsys,
        "extract-pairs",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--alignments", alignments,
        "--source-embeddings", FIXTURE / "source.cemb",
        "--target-embeddings", FIXTURE / "target.cemb",
        "--output", pairs,
        "--senses-output", senses,
        "--vocab-output", vocab,
        "--seed", 7,
    )
    assert code == 0
    assert "30 anchor pairs" in out
    assert "30 sense keys" in out
    assert "30 types" in out

    mapping = tmp_path / "mapping.txt"
    code, out, _ = run_cli(
        capsys, "map", "--pairs", pairs, "--output", mapping
    )
    assert code == 0
    assert "procrustes on 30 pairs" in out

    report_json = tmp_path / "eval.json"
    code, out, _ = run_cli(
        capsys,
        "evaluate",
        "--pairs", pairs,
        "--mapping", mapping,
        "--target-vocab", vocab,
        "--dictionary", FIXTURE / "dict.txt",
        "--output", report_json,
    )
    assert code == 0
    # An exact-rotation fixture is solved even without normalization.
    report = json.loads(report_json.read_text(encoding="utf-8"))
    assert report["csls"]["precision_at"]["1"] == 100.0
    assert report["nn"]["precision_at"]["1"] == 100.0

    metrics_json = tmp_path / "metrics.json"
    code, out, _ = run_cli(
        capsys, "metrics", "--pairs", pairs, "--output", metrics_json
    )
    assert code == 0
    assert "RS=" in out
    metrics = json.loads(metrics_json.read_text(encoding="utf-8"))
    assert metrics["relational_similarity"] > 0.9


def test_normalize_command_round_trips_a_text_matrix(tmp_path, capsys):
    # Produce a vocabulary matrix via extract-pairs, then normalize it.
    alignments = tmp_path / "alignments.txt"
    run_cli(
        capsys,
        "align",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--output", alignments,
    )
    pairs = tmp_path / "pairs.bin"
    vocab = tmp_path / "vocab.txt"
    run_cli(
        capsys,
        "extract-pairs",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--alignments", alignments,
        "--source-embeddings", FIXTURE / "source.cemb",
        "--target-embeddings", FIXTURE / "target.cemb",
        "--output", pairs,
        "--vocab-output", vocab,
    )
    normalized = tmp_path / "vocab_normalized.txt"
    code, out, _ = run_cli(
        capsys, "normalize", "--input", vocab, "--output", normalized
    )
    assert code == 0
    assert "iterations" in out
    assert normalized.is_file()

    import numpy as np

    from ctxmap.corpus_io import read_embeddings

    matrix = read_embeddings(normalized, normalized=True)
    mean = matrix.vectors.mean(axis=0)
    assert float(np.linalg.norm(mean)) <= 1e-3


def test_map_least_squares_and_train_size(tmp_path, capsys):
    alignments = tmp_path / "alignments.txt"
    run_cli(
        capsys,
        "align",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--output", alignments,
    )
    pairs = tmp_path / "pairs.bin"
    run_cli(
        capsys,
        "extract-pairs",
        "--source-text", FIXTURE / "source.txt",
        "--target-text", FIXTURE / "target.txt",
        "--alignments", alignments,
        "--source-embeddings", FIXTURE / "source.cemb",
        "--target-embeddings", FIXTURE / "target.cemb",
        "--output", pairs,
    )
    mapping = tmp_path / "mapping.txt"
    code, out, _ = run_cli(
        capsys,
        "map",
        "--pairs", pairs,
        "--output", mapping,
        "--method", "least_squares",
        "--train-size", 20,
    )
    assert code == 0
    assert "least_squares on 20 pairs" in out

    from ctxmap.mapping import read_mapping

    fitted = read_mapping(mapping)
    assert not fitted.orthogonal
    assert fitted.n_pairs == 20
