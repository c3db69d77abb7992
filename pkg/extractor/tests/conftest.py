"""Shared fixtures: a tiny randomly initialized BERT saved to disk."""

from __future__ import annotations

from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "cat", "dog", "bird", "runs", "sees", "walks",
    "fast", "slow", "green", "blue", "tree", "river", "stone",
    "play", "walk", "jump", "##ing", "##ed", "##s",
    "and", "over", "under", "near",
]

MAX_POSITIONS = 48

TEN_SENTENCES = [
    "the cat runs fast",
    "a dog sees the bird",
    "the bird walks near the river",
    "a green tree and a blue stone",
    "the dog playing near the tree",          # "playing" = play + ##ing
    "a cat jumped over the stone",            # "jumped" = jump + ##ed
    "the zebra runs",                         # "zebra" -> [UNK]
    "slow and fast",
    "the cat sees a dog and a bird",
    "walks runs sees",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    """A wordpiece tokenizer plus a 4-layer random-weight encoder."""
    root = tmp_path_factory.mktemp("tiny-bert")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file))
    tokenizer.save_pretrained(root)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=4,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=MAX_POSITIONS,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(root)
    return root


@pytest.fixture()
def ten_sentence_corpus(tmp_path) -> Path:
    path = tmp_path / "corpus.txt"
    path.write_text("\n".join(TEN_SENTENCES) + "\n", encoding="utf-8")
    return path
