"""End-to-end pipeline: corpus + token embeddings in, evaluation out.

Stages, in order:

1. ``load-corpus`` — read and cross-validate all inputs.
2. ``align`` — train word alignment in both directions, decode, and
   keep the symmetrized one-to-one links.
3. ``collect`` — sample, per source word type, the aligned
   (source vector, target vector) occurrence pairs.
4. ``build`` — average occurrences into type-level anchor pairs, build
   the target vocabulary matrix, and (optionally) split types into
   senses.
5. ``normalize`` (optional) — iteratively center/renormalize each
   space; the target-side transform is fitted on the vocabulary matrix
   and replayed onto the paired target anchors so both stay consistent.
6. ``map`` — fit the linear map on the most-frequent anchor pairs.
7. ``evaluate`` — dictionary induction via plain and hub-corrected
   retrieval against the target vocabulary.
8. ``metrics`` — geometry diagnostics of the spaces the map was
   trained on.

Every artifact is written under ``output_dir`` and its SHA-256 digest
recorded in ``manifest.json``; two runs with the same inputs, config,
and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .aligner import align_corpus, write_alignments
from .corpus_io import (
    digest_file,
    iter_sides,
    load_dictionary,
    load_parallel_corpus,
    load_stopwords,
    read_token_stream,
    validate_stream_against_corpus,
    write_embeddings,
)
from .errors import StageError, ValidationError
from .geometry import geometry_report, isotropy
from .mapping import (
    fit_least_squares,
    fit_procrustes,
    map_embeddings,
    residual,
    training_prefix,
    write_mapping,
)
from .normalize import fit_iterative_normalizer
from .representations import (
    PairedVectors,
    build_type_level,
    build_vocab_matrix,
    cluster_senses,
    collect_occurrences,
    write_paired_vectors,
)
from .retrieval import evaluate_bdi

MAPPING_METHODS = ("procrustes", "least_squares")

__all__ = ["PipelineConfig", "PipelineResult", "run_pipeline", "MAPPING_METHODS"]


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_int_tuple(value: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in value.split(",") if part.strip())


@dataclass
class PipelineConfig:
    """Flat configuration; every field maps to one ``key = value`` line."""

    source_text: Path
    target_text: Path
    source_embeddings: Path
    target_embeddings: Path
    eval_dictionary: Path
    output_dir: Path
    stopwords: Path | None = None
    seed: int = 0
    max_sentence_len: int = 150
    align_epochs: int = 5
    diagonal_tension: float = 4.0
    null_mass: float = 0.08
    occurrence_cap: int = 10000
    min_count: int = 5
    senses: bool = True
    sense_min_count: int = 100
    max_senses: int = 8
    knee_sensitivity: float = 1.0
    normalize: bool = True
    normalize_iters: int = 5
    normalize_tol: float = 1e-3
    mapping: str = "procrustes"
    train_size: int = 0  # 0 = use every anchor pair
    retrieval_neighborhood: int = 10
    eval_k: tuple[int, ...] = (1, 5, 10)
    isotropy_sample: int = 1000
    relational_pairs: int = 1500

    _PATH_KEYS = (
        "source_text",
        "target_text",
        "source_embeddings",
        "target_embeddings",
        "eval_dictionary",
        "output_dir",
        "stopwords",
    )
    _REQUIRED = _PATH_KEYS[:-1]

    def __post_init__(self) -> None:
        if self.mapping not in MAPPING_METHODS:
            raise ValidationError(
                f"mapping must be one of {', '.join(MAPPING_METHODS)}; "
                f"got {self.mapping!r}"
            )
        if not self.eval_k:
            raise ValidationError("eval_k must list at least one cutoff")

    @classmethod
    def from_dict(cls, values: dict, base_dir: Path | None = None) -> "PipelineConfig":
        """Build a config from string values (e.g. a parsed config file).

        Relative paths are resolved against ``base_dir`` when given.
        """
        converters = {}
        for spec in fields(cls):
            if spec.name in cls._PATH_KEYS:
                converters[spec.name] = Path
            elif spec.type == "int":
                converters[spec.name] = int
            elif spec.type == "float":
                converters[spec.name] = float
            elif spec.type == "bool":
                converters[spec.name] = _parse_bool
            elif spec.name == "eval_k":
                converters[spec.name] = _parse_int_tuple
            else:
                converters[spec.name] = str
        known = set(converters)
        parsed = {}
        for key, raw in values.items():
            if key not in known:
                raise ValidationError(
                    f"unknown config key {key!r} (valid keys: "
                    f"{', '.join(sorted(known))})"
                )
            try:
                value = converters[key](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from exc
            if key in cls._PATH_KEYS and base_dir is not None and value is not None:
                value = Path(value)
                if not value.is_absolute():
                    value = base_dir / value
            parsed[key] = value
        missing = [key for key in cls._REQUIRED if key not in parsed]
        if missing:
            raise ValidationError(
                f"missing required config keys: {', '.join(missing)}"
            )
        return cls(**parsed)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        """Parse a ``key = value`` file ('#' comments, blank lines allowed)."""
        path = Path(path)
        values: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep or not key.strip() or not value.strip():
                    raise ValidationError(
                        f"{path}: line {lineno}: expected 'key = value', "
                        f"got {raw.strip()!r}"
                    )
                key = key.strip()
                if key in values:
                    raise ValidationError(
                        f"{path}: line {lineno}: duplicate key {key!r}"
                    )
                values[key] = value.strip()
        return cls.from_dict(values, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {}
        for spec in fields(self):
            value = getattr(self, spec.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[spec.name] = value
        return out


@dataclass
class PipelineResult:
    manifest: dict
    manifest_path: Path
    output_dir: Path
    evaluation: dict = field(default_factory=dict)


class _Recorder:
    """Collects per-stage timings, artifacts, and info into the manifest."""

    def __init__(self, output_dir: Path, manifest: dict, progress) -> None:
        self.output_dir = output_dir
        self.manifest = manifest
        self.progress = progress
        self.all_artifacts: dict[str, str] = {}

    def run(self, name: str, body) -> dict:
        if self.progress:
            self.progress(f"[{name}]")
        started = time.perf_counter()
        entry = {"name": name, "artifacts": {}, "info": {}}
        try:
            body(entry)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        entry["seconds"] = round(time.perf_counter() - started, 6)
        self.all_artifacts.update(entry["artifacts"])
        self.manifest["stages"].append(entry)
        return entry

    def save(self, entry: dict, rel_name: str, writer) -> Path:
        path = self.output_dir / rel_name
        writer(path)
        entry["artifacts"][rel_name] = digest_file(path)
        return path


def run_pipeline(config: PipelineConfig, progress=None) -> PipelineResult:
    """Run every stage and write ``manifest.json`` into the output dir."""
    started = time.perf_counter()
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": {"name": "ctxmap", "version": __version__},
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "config": config.to_dict(),
        "inputs": {},
        "stages": [],
    }
    recorder = _Recorder(output_dir, manifest, progress)
    state: dict = {}

    def load_corpus(entry):
        input_paths = {
            "source_text": config.source_text,
            "target_text": config.target_text,
            "source_embeddings": config.source_embeddings,
            "target_embeddings": config.target_embeddings,
            "eval_dictionary": config.eval_dictionary,
        }
        if config.stopwords is not None:
            input_paths["stopwords"] = config.stopwords
        for key, path in input_paths.items():
            manifest["inputs"][key] = {
                "path": str(path),
                "sha256": digest_file(path),
            }
        corpus = load_parallel_corpus(
            config.source_text, config.target_text, config.max_sentence_len
        )
        source_stream = read_token_stream(config.source_embeddings)
        target_stream = read_token_stream(config.target_embeddings)
        src_sents, tgt_sents = iter_sides(corpus)
        validate_stream_against_corpus(source_stream, src_sents, "source stream")
        validate_stream_against_corpus(target_stream, tgt_sents, "target stream")
        state["corpus"] = corpus
        state["source_stream"] = source_stream
        state["target_stream"] = target_stream
        state["dictionary"] = load_dictionary(config.eval_dictionary)
        state["stopwords"] = (
            load_stopwords(config.stopwords)
            if config.stopwords is not None
            else frozenset()
        )
        entry["info"] = {
            "sentences": len(corpus.pairs),
            "source_dim": source_stream.dim,
            "target_dim": target_stream.dim,
            "dictionary_entries": len(state["dictionary"].entries),
            "stopwords": len(state["stopwords"]),
        }

    def align(entry):
        alignments, forward, backward = align_corpus(
            state["corpus"],
            epochs=config.align_epochs,
            diagonal_tension=config.diagonal_tension,
            null_mass=config.null_mass,
        )
        state["alignments"] = alignments
        recorder.save(
            entry, "alignments.txt", lambda p: write_alignments(alignments, p)
        )
        entry["info"] = {
            "links": sum(len(a.links) for a in alignments),
            "forward_log_likelihoods": [
                round(v, 6) for v in forward.epoch_log_likelihoods
            ],
            "backward_log_likelihoods": [
                round(v, 6) for v in backward.epoch_log_likelihoods
            ],
        }

    def collect(entry):
        occurrences = collect_occurrences(
            state["corpus"],
            state["alignments"],
            state["source_stream"],
            state["target_stream"],
            seed=config.seed,
            cap=config.occurrence_cap,
            min_count=config.min_count,
        )
        state["occurrences"] = occurrences
        entry["info"] = {
            "types": len(occurrences),
            "occurrences": sum(o.total_count for o in occurrences.values()),
            "sampled": sum(o.sampled_count for o in occurrences.values()),
        }

    def build(entry):
        type_pairs = build_type_level(state["occurrences"])
        state["type_pairs"] = type_pairs
        recorder.save(
            entry, "type_pairs.bin", lambda p: write_paired_vectors(p, type_pairs)
        )
        _, tgt_sents = iter_sides(state["corpus"])
        vocab = build_vocab_matrix(
            tgt_sents,
            state["target_stream"],
            seed=config.seed,
            cap=config.occurrence_cap,
            min_count=config.min_count,
            name="target vocabulary",
        )
        state["target_vocab"] = vocab
        recorder.save(
            entry, "target_vocab.txt", lambda p: write_embeddings(vocab, p)
        )
        entry["info"] = {
            "anchor_pairs": len(type_pairs),
            "target_vocab_size": len(vocab),
        }
        if config.senses:
            senses = cluster_senses(
                state["occurrences"],
                stopwords=state["stopwords"],
                seed=config.seed,
                sense_min_count=config.sense_min_count,
                max_senses=config.max_senses,
                sensitivity=config.knee_sensitivity,
            )
            recorder.save(
                entry, "sense_pairs.bin", lambda p: write_paired_vectors(p, senses)
            )
            split = sum(1 for key in senses.keys if not key.endswith("#1"))
            entry["info"]["sense_keys"] = len(senses)
            entry["info"]["extra_senses"] = split

    def normalize(entry):
        type_pairs = state["type_pairs"]
        _, x_normalized, x_report = fit_iterative_normalizer(
            type_pairs.source, config.normalize_iters, config.normalize_tol
        )
        tgt_normalizer, vocab_normalized, t_report = fit_iterative_normalizer(
            state["target_vocab"], config.normalize_iters, config.normalize_tol
        )
        y_normalized = tgt_normalizer.apply(type_pairs.target)
        state["type_pairs"] = PairedVectors(
            counts=type_pairs.counts, source=x_normalized, target=y_normalized
        )
        state["target_vocab"] = vocab_normalized
        recorder.save(
            entry,
            "normalized_pairs.bin",
            lambda p: write_paired_vectors(p, state["type_pairs"]),
        )
        recorder.save(
            entry,
            "target_vocab_normalized.txt",
            lambda p: write_embeddings(vocab_normalized, p),
        )
        entry["info"] = {
            "source_iterations": x_report.iterations,
            "source_final_mean_norm": x_report.final_mean_norm,
            "target_iterations": t_report.iterations,
            "target_final_mean_norm": t_report.final_mean_norm,
        }

    def fit_map(entry):
        type_pairs = state["type_pairs"]
        size = config.train_size if config.train_size > 0 else len(type_pairs)
        x_train, y_train = training_prefix(
            type_pairs.source.vectors, type_pairs.target.vectors, size
        )
        fitter = (
            fit_procrustes if config.mapping == "procrustes" else fit_least_squares
        )
        mapping = fitter(x_train, y_train)
        state["mapping"] = mapping
        recorder.save(entry, "mapping.txt", lambda p: write_mapping(p, mapping))
        w = mapping.matrix
        entry["info"] = {
            "method": config.mapping,
            "training_pairs": size,
            "training_residual": residual(x_train, y_train, mapping),
            "orthogonality_defect": float(
                np.max(np.abs(w @ w.T - np.eye(w.shape[0])))
            ),
        }

    def evaluate(entry):
        mapped = map_embeddings(state["type_pairs"].source, state["mapping"])
        state["mapped_source"] = mapped
        reports = {}
        for method in ("nn", "csls"):
            report = evaluate_bdi(
                mapped,
                state["target_vocab"],
                state["dictionary"],
                method=method,
                k_values=config.eval_k,
                neighborhood=config.retrieval_neighborhood,
            )
            reports[method] = {
                "precision_at": {str(k): v for k, v in report.precision_at.items()},
                "evaluated": report.evaluated,
                "skipped_source_oov": report.skipped_source_oov,
                "skipped_target_oov": report.skipped_target_oov,
                "neighborhood": report.neighborhood,
                "coverage": report.coverage,
            }
        state["evaluation"] = reports
        recorder.save(
            entry,
            "evaluation.json",
            lambda p: Path(p).write_text(
                json.dumps(reports, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            ),
        )
        entry["info"] = {
            method: report["precision_at"] for method, report in reports.items()
        }

    def metrics(entry):
        type_pairs = state["type_pairs"]
        n = len(type_pairs)
        report = geometry_report(
            type_pairs.source,
            type_pairs.target,
            r=min(config.isotropy_sample, n),
            pair_count=min(config.relational_pairs, n),
            seed=config.seed,
        )
        vocab = state["target_vocab"]
        values = {
            "isotropy_source": report.isotropy_source,
            "isotropy_target": report.isotropy_target,
            "isotropy_target_vocab": isotropy(
                vocab,
                r=min(config.isotropy_sample, len(vocab)),
                seed=config.seed,
            ),
            "isometry_defect": report.isometry_defect,
            "relational_similarity": report.relational_similarity,
            "sample_size": report.sample_size,
            "pair_count": report.pair_count,
            "seed": report.seed,
        }
        state["metrics"] = values
        recorder.save(
            entry,
            "metrics.json",
            lambda p: Path(p).write_text(
                json.dumps(values, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            ),
        )
        entry["info"] = {
            key: values[key]
            for key in (
                "isotropy_source",
                "isotropy_target",
                "isometry_defect",
                "relational_similarity",
            )
        }

    recorder.run("load-corpus", load_corpus)
    recorder.run("align", align)
    recorder.run("collect", collect)
    recorder.run("build", build)
    if config.normalize:
        recorder.run("normalize", normalize)
    recorder.run("map", fit_map)
    recorder.run("evaluate", evaluate)
    recorder.run("metrics", metrics)

    manifest["artifacts"] = dict(sorted(recorder.all_artifacts.items()))
    manifest["total_seconds"] = round(time.perf_counter() - started, 6)
    manifest_path = output_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return PipelineResult(
        manifest=manifest,
        manifest_path=manifest_path,
        output_dir=output_dir,
        evaluation=state.get("evaluation", {}),
    )
