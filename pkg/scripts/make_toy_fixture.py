#!/usr/bin/env python3
"""Regenerate the committed toy fixture under tests/fixtures/toy/.

The fixture is a 30-word bijective-lexicon corpus with per-token
embedding streams built from known type base vectors: every target base
is an exact rotation of its source base, so a correctly fitted
orthogonal map retrieves every dictionary entry at rank 1.  All
randomness is seeded; rerunning this script writes byte-identical
files.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from ctxmap.corpus_io import (
    BilingualDictionary,
    TokenEmbeddingStream,
    TokenRecord,
    write_dictionary,
    write_token_stream,
)

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "toy"
VOCAB = 30
DIM = 16
SENTENCES = 240
MAX_LEN = 6
SWAP_PROB = 0.2
NOISE = 0.08
ABSENT_PROB = 0.03
MAX_BASE_COSINE = 0.85

CONFIG_TEXT = """\
# Toy pipeline configuration; paths are relative to this file.
source_text = source.txt
target_text = target.txt
source_embeddings = source.cemb
target_embeddings = target.cemb
eval_dictionary = dict.txt
output_dir = out
seed = 7
align_epochs = 5
min_count = 5
normalize = true
mapping = procrustes
eval_k = 1,5,10
retrieval_neighborhood = 10
"""


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def make_corpus() -> list[tuple[list[str], list[str]]]:
    rng = random.Random(7)
    source_words = [f"s{i}" for i in range(VOCAB)]
    translation = {f"s{i}": f"t{i}" for i in range(VOCAB)}
    pairs = []
    for _ in range(SENTENCES):
        length = rng.randint(1, MAX_LEN)
        words = rng.sample(source_words, length)
        order = list(range(length))
        for i in range(0, length - 1, 2):
            if rng.random() < SWAP_PROB:
                order[i], order[i + 1] = order[i + 1], order[i]
        target = [translation[words[order[i]]] for i in range(length)]
        pairs.append((words, target))
    return pairs


def make_bases() -> tuple[np.ndarray, np.ndarray]:
    """Source type bases plus their exactly-rotated target counterparts."""
    rng = np.random.default_rng(11)
    while True:
        bases = rng.normal(size=(VOCAB, DIM))
        bases /= np.linalg.norm(bases, axis=1, keepdims=True)
        cosines = np.abs(bases @ bases.T - np.eye(VOCAB))
        if cosines.max() < MAX_BASE_COSINE:
            break
    q, r = np.linalg.qr(rng.normal(size=(DIM, DIM)))
    q = q * np.sign(np.diag(r))
    return bases, bases @ q.T


def make_stream(
    sentences: list[list[str]], base_of: dict[str, np.ndarray], seed: int
) -> TokenEmbeddingStream:
    rng = np.random.default_rng(seed)
    built = []
    for tokens in sentences:
        records = []
        for token in tokens:
            if rng.random() < ABSENT_PROB:
                records.append(TokenRecord(token=token))
                continue
            vector = unit(base_of[token] + NOISE * rng.normal(size=DIM))
            records.append(
                TokenRecord(token=token, vector=vector.astype(np.float32))
            )
        built.append(tuple(records))
    return TokenEmbeddingStream(dim=DIM, sentences=tuple(built))


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    pairs = make_corpus()
    (FIXTURE_DIR / "source.txt").write_text(
        "".join(" ".join(src) + "\n" for src, _ in pairs), encoding="utf-8"
    )
    (FIXTURE_DIR / "target.txt").write_text(
        "".join(" ".join(tgt) + "\n" for _, tgt in pairs), encoding="utf-8"
    )

    src_bases, tgt_bases = make_bases()
    src_base_of = {f"s{i}": src_bases[i] for i in range(VOCAB)}
    tgt_base_of = {f"t{i}": tgt_bases[i] for i in range(VOCAB)}
    write_token_stream(
        make_stream([src for src, _ in pairs], src_base_of, seed=13),
        FIXTURE_DIR / "source.cemb",
    )
    write_token_stream(
        make_stream([tgt for _, tgt in pairs], tgt_base_of, seed=17),
        FIXTURE_DIR / "target.cemb",
    )

    write_dictionary(
        BilingualDictionary(
            entries=tuple((f"s{i}", f"t{i}") for i in range(VOCAB))
        ),
        FIXTURE_DIR / "dict.txt",
    )
    (FIXTURE_DIR / "toy.cfg").write_text(CONFIG_TEXT, encoding="utf-8")
    (FIXTURE_DIR / ".gitignore").write_text("out/\n", encoding="utf-8")
    token_count = sum(len(src) for src, _ in pairs)
    print(
        f"wrote fixture to {FIXTURE_DIR}: {SENTENCES} sentences, "
        f"{token_count} tokens/side, vocab {VOCAB}, dim {DIM}"
    )


if __name__ == "__main__":
    main()
