"""Corpus, dictionary, embedding, and token-stream IO contracts."""

from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxmap.corpus_io import (
    CEMB_MAGIC,
    EmbeddingMatrix,
    ParallelCorpus,
    TokenEmbeddingStream,
    TokenRecord,
    load_dictionary,
    load_parallel_corpus,
    load_stopwords,
    read_embeddings,
    read_token_stream,
    validate_stream_against_corpus,
    write_dictionary,
    write_embeddings,
    write_token_stream,
)
from ctxmap.errors import DataFormatError, ValidationError

# ---------------------------------------------------------------------------
# parallel corpus
# ---------------------------------------------------------------------------


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_corpus_loads_pairs_in_order(tmp_path):
    write_lines(tmp_path / "s.txt", ["a b c", "d e"])
    write_lines(tmp_path / "t.txt", ["x y", "z w v"])
    corpus = load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt")
    assert corpus.pairs == (
        (("a", "b", "c"), ("x", "y")),
        (("d", "e"), ("z", "w", "v")),
    )


def test_corpus_truncates_long_sentences(tmp_path):
    long_line = " ".join(f"w{i}" for i in range(200))
    write_lines(tmp_path / "s.txt", [long_line])
    write_lines(tmp_path / "t.txt", ["x"])
    corpus = load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt", max_len=150)
    assert len(corpus.pairs[0][0]) == 150
    assert corpus.pairs[0][0][:3] == ("w0", "w1", "w2")
    assert corpus.pairs[0][0][-1] == "w149"


def test_corpus_under_threshold_is_untouched(tmp_path):
    write_lines(tmp_path / "s.txt", ["a b c"])
    write_lines(tmp_path / "t.txt", ["x y z"])
    corpus = load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt", max_len=150)
    assert corpus.pairs[0] == (("a", "b", "c"), ("x", "y", "z"))


def test_corpus_line_count_mismatch_names_both_counts(tmp_path):
    write_lines(tmp_path / "s.txt", ["a", "b", "c", "d", "e"])
    write_lines(tmp_path / "t.txt", ["x", "y", "z", "w"])
    with pytest.raises(DataFormatError, match=r"5.*4|4.*5"):
        load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt")


def test_corpus_empty_line_reports_line_number(tmp_path):
    (tmp_path / "s.txt").write_text("a b\n\nc\n", encoding="utf-8")
    write_lines(tmp_path / "t.txt", ["x", "y", "z"])
    with pytest.raises(DataFormatError, match="line 2"):
        load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt")


# ---------------------------------------------------------------------------
# dictionary
# ---------------------------------------------------------------------------


def test_dictionary_keeps_polysemous_entries(tmp_path):
    write_lines(tmp_path / "d.txt", ["cat katze", "cat mieze", "dog hund"])
    d = load_dictionary(tmp_path / "d.txt")
    assert d.targets_for("cat") == ("katze", "mieze")
    assert d.targets_for("dog") == ("hund",)
    assert d.targets_for("bird") == ()


def test_dictionary_removes_duplicates_keeping_first_order(tmp_path):
    write_lines(tmp_path / "d.txt", ["a x", "b y", "a x", "a z"])
    d = load_dictionary(tmp_path / "d.txt")
    assert d.entries == (("a", "x"), ("b", "y"), ("a", "z"))


def test_dictionary_malformed_line_reports_number(tmp_path):
    write_lines(tmp_path / "d.txt", ["a x", "b y z"])
    with pytest.raises(DataFormatError, match="line 2"):
        load_dictionary(tmp_path / "d.txt")


def test_dictionary_empty_file_is_error(tmp_path):
    (tmp_path / "d.txt").write_text("", encoding="utf-8")
    with pytest.raises(DataFormatError, match="empty"):
        load_dictionary(tmp_path / "d.txt")


def test_dictionary_round_trip(tmp_path):
    write_lines(tmp_path / "d.txt", ["cat katze", "cat mieze", "dog hund"])
    d = load_dictionary(tmp_path / "d.txt")
    write_dictionary(d, tmp_path / "d2.txt")
    assert load_dictionary(tmp_path / "d2.txt").entries == d.entries


# ---------------------------------------------------------------------------
# embedding matrix type
# ---------------------------------------------------------------------------


def test_matrix_rejects_duplicate_words():
    with pytest.raises(ValidationError, match="duplicate"):
        EmbeddingMatrix(words=("a", "a"), vectors=np.zeros((2, 3)))


def test_matrix_rejects_non_finite():
    with pytest.raises(ValidationError, match="non-finite"):
        EmbeddingMatrix(words=("a",), vectors=np.array([[np.nan, 0.0]]))


def test_matrix_normalized_flag_is_validated():
    with pytest.raises(ValidationError, match="norm"):
        EmbeddingMatrix(words=("a",), vectors=np.array([[3.0, 4.0]]), normalized=True)
    m = EmbeddingMatrix(words=("a",), vectors=np.array([[0.6, 0.8]]), normalized=True)
    assert m.row("a") == pytest.approx([0.6, 0.8])


def test_matrix_rejects_whitespace_words():
    with pytest.raises(ValidationError, match="whitespace"):
        EmbeddingMatrix(words=("a b",), vectors=np.zeros((1, 2)))


# ---------------------------------------------------------------------------
# embedding text format
# ---------------------------------------------------------------------------


def test_embeddings_read_known_file(tmp_path):
    (tmp_path / "e.txt").write_text("2 3\nfoo 1 2 3\nbar 4 5 6\n", encoding="utf-8")
    m = read_embeddings(tmp_path / "e.txt")
    assert m.words == ("foo", "bar")
    np.testing.assert_array_equal(m.vectors, [[1, 2, 3], [4, 5, 6]])


def test_embeddings_wrong_value_count_names_line(tmp_path):
    (tmp_path / "e.txt").write_text("2 3\nfoo 1 2 3\nbar 4 5\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 3"):
        read_embeddings(tmp_path / "e.txt")


def test_embeddings_missing_rows_is_error(tmp_path):
    (tmp_path / "e.txt").write_text("3 2\nfoo 1 2\nbar 3 4\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="expected 3 rows"):
        read_embeddings(tmp_path / "e.txt")


def test_embeddings_trailing_rows_is_error(tmp_path):
    (tmp_path / "e.txt").write_text("1 2\nfoo 1 2\nbar 3 4\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="trailing"):
        read_embeddings(tmp_path / "e.txt")


def test_embeddings_duplicate_word_is_error(tmp_path):
    (tmp_path / "e.txt").write_text("2 2\nfoo 1 2\nfoo 3 4\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="duplicate"):
        read_embeddings(tmp_path / "e.txt")


def test_embeddings_non_numeric_value_is_error(tmp_path):
    (tmp_path / "e.txt").write_text("1 2\nfoo 1 oops\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 2"):
        read_embeddings(tmp_path / "e.txt")


def test_embeddings_bad_header_is_error(tmp_path):
    (tmp_path / "e.txt").write_text("banana\nfoo 1 2\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="header"):
        read_embeddings(tmp_path / "e.txt")


@given(
    n=st.integers(min_value=0, max_value=12),
    dim=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_embeddings_round_trip_within_tolerance(tmp_path_factory, n, dim, seed):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(scale=3.0, size=(n, dim)) * 10.0 ** rng.integers(-6, 6, size=(n, 1))
    words = tuple(f"w{i}" for i in range(n))
    m = EmbeddingMatrix(words=words, vectors=vectors)
    path = tmp_path_factory.mktemp("emb") / "e.txt"
    write_embeddings(m, path)
    back = read_embeddings(path)
    assert back.words == m.words
    np.testing.assert_allclose(back.vectors, m.vectors, rtol=1e-6, atol=0)


def test_embeddings_read_write_read_is_identity(tmp_path):
    rng = np.random.default_rng(7)
    m = EmbeddingMatrix(
        words=tuple(f"w{i}" for i in range(5)), vectors=rng.normal(size=(5, 4))
    )
    write_embeddings(m, tmp_path / "a.txt")
    first = read_embeddings(tmp_path / "a.txt")
    write_embeddings(first, tmp_path / "b.txt")
    second = read_embeddings(tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    np.testing.assert_array_equal(first.vectors, second.vectors)


# ---------------------------------------------------------------------------
# token stream binary format
# ---------------------------------------------------------------------------


def hand_packed_stream() -> bytes:
    """Reference bytes built field by field, independent of the writer."""
    dim = 2
    out = b"CEMB"
    out += struct.pack("<III", 1, dim, 2)  # version, dim, sentences
    # sentence 0: "ab" with vector, "c" absent
    out += struct.pack("<I", 2)
    out += struct.pack("<H", 2) + b"ab" + struct.pack("<B", 1)
    out += np.array([0.6, 0.8], dtype="<f4").tobytes()
    out += struct.pack("<H", 1) + b"c" + struct.pack("<B", 0)
    # sentence 1: unicode token with vector
    tok = "héllo".encode("utf-8")
    out += struct.pack("<I", 1)
    out += struct.pack("<H", len(tok)) + tok + struct.pack("<B", 1)
    out += np.array([1.0, 0.0], dtype="<f4").tobytes()
    return out


def test_stream_reads_hand_packed_bytes(tmp_path):
    path = tmp_path / "s.cemb"
    path.write_bytes(hand_packed_stream())
    stream = read_token_stream(path)
    assert stream.dim == 2
    assert len(stream.sentences) == 2
    s0, s1 = stream.sentences
    assert [r.token for r in s0] == ["ab", "c"]
    assert s0[0].present and not s0[1].present
    np.testing.assert_allclose(s0[0].vector, [0.6, 0.8], atol=1e-7)
    assert s1[0].token == "héllo"
    np.testing.assert_array_equal(s1[0].vector, [1.0, 0.0])


def test_stream_writer_matches_hand_packed_bytes(tmp_path):
    stream = TokenEmbeddingStream(
        dim=2,
        sentences=(
            (
                TokenRecord("ab", np.array([0.6, 0.8], dtype=np.float32)),
                TokenRecord("c", None),
            ),
            (TokenRecord("héllo", np.array([1.0, 0.0], dtype=np.float32)),),
        ),
    )
    path = tmp_path / "s.cemb"
    write_token_stream(stream, path)
    assert path.read_bytes() == hand_packed_stream()


def test_stream_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    sentences = []
    for _ in range(5):
        records = []
        for t in range(int(rng.integers(1, 7))):
            if rng.random() < 0.25:
                records.append(TokenRecord(f"tok{t}", None))
            else:
                v = rng.normal(size=4).astype(np.float32)
                records.append(TokenRecord(f"tok{t}", v))
        sentences.append(tuple(records))
    stream = TokenEmbeddingStream(dim=4, sentences=tuple(sentences))
    path = tmp_path / "s.cemb"
    write_token_stream(stream, path)
    back = read_token_stream(path)
    assert len(back.sentences) == len(stream.sentences)
    for orig, got in zip(stream.sentences, back.sentences):
        assert [r.token for r in orig] == [r.token for r in got]
        for a, b in zip(orig, got):
            if a.vector is None:
                assert b.vector is None
            else:
                np.testing.assert_array_equal(a.vector, b.vector)
    # writing the parsed stream again is byte-identical
    write_token_stream(back, tmp_path / "s2.cemb")
    assert (tmp_path / "s2.cemb").read_bytes() == path.read_bytes()


def test_stream_bad_magic(tmp_path):
    path = tmp_path / "s.cemb"
    path.write_bytes(b"XEMB" + hand_packed_stream()[4:])
    with pytest.raises(DataFormatError, match="magic"):
        read_token_stream(path)


def test_stream_version_mismatch(tmp_path):
    data = bytearray(hand_packed_stream())
    data[4:8] = struct.pack("<I", 9)
    path = tmp_path / "s.cemb"
    path.write_bytes(bytes(data))
    with pytest.raises(DataFormatError, match="version 9"):
        read_token_stream(path)


def test_stream_truncation_reports_byte_offset(tmp_path):
    data = hand_packed_stream()
    cut = data[: len(data) - 3]
    path = tmp_path / "s.cemb"
    path.write_bytes(cut)
    with pytest.raises(DataFormatError, match="byte offset"):
        read_token_stream(path)


def test_stream_trailing_bytes_is_error(tmp_path):
    path = tmp_path / "s.cemb"
    path.write_bytes(hand_packed_stream() + b"\x00")
    with pytest.raises(DataFormatError, match="trailing"):
        read_token_stream(path)


def test_stream_writer_rejects_wrong_dimension():
    with pytest.raises(ValidationError, match="dimension"):
        TokenEmbeddingStream(
            dim=3,
            sentences=((TokenRecord("a", np.zeros(2, dtype=np.float32)),),),
        )


def test_validate_stream_against_corpus(tmp_path):
    stream = TokenEmbeddingStream(
        dim=2,
        sentences=(
            (TokenRecord("a", None), TokenRecord("b", None)),
            (TokenRecord("c", None),),
        ),
    )
    validate_stream_against_corpus(stream, [("a", "b"), ("c",)])
    # truncated corpus side is fine (stream may be longer)
    validate_stream_against_corpus(stream, [("a",), ("c",)])
    with pytest.raises(ValidationError, match="sentence"):
        validate_stream_against_corpus(stream, [("a", "b")])
    with pytest.raises(ValidationError, match="mismatch"):
        validate_stream_against_corpus(stream, [("a", "x"), ("c",)])


def test_stopwords_loader(tmp_path):
    (tmp_path / "st.txt").write_text("the\n\na\nof\n", encoding="utf-8")
    assert load_stopwords(tmp_path / "st.txt") == frozenset({"the", "a", "of"})


def test_corpus_object_is_reusable():
    corpus = ParallelCorpus(pairs=((("a",), ("x",)),))
    assert len(corpus) == 1
    assert list(corpus) == [(("a",), ("x",))]
