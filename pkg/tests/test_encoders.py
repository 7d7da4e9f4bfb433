import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentprobe.corpus import TokenSequence
from sentprobe.encoders import (
    Encoder,
    EncoderSpec,
    PrecomputedEmbeddings,
    SentenceEmbedding,
    TokenEmbeddingTable,
    encode_avg,
    encode_concat,
    encode_hier,
    encode_max,
    lookup_precomputed,
    native_spec,
    read_embedding_file,
    write_embedding_file,
)
from sentprobe.errors import ConfigurationError, DomainError, EmbeddingLookupError, FormatError


def table_of(**vecs):
    dim = len(next(iter(vecs.values())))
    return TokenEmbeddingTable(dim, {k: np.array(v, float) for k, v in vecs.items()}, np.zeros(dim))


def ts(*tokens, line=None):
    return TokenSequence(tokens, line_index=line)


T = table_of(a=[1, 0], b=[0, 1], c=[2, 2], d=[4, -2])


def test_avg_examples():
    np.testing.assert_array_equal(encode_avg(ts("a"), T).values, [1, 0])
    np.testing.assert_array_equal(encode_avg(ts("a", "b"), T).values, [0.5, 0.5])


def test_max_examples():
    np.testing.assert_array_equal(encode_max(ts("a", "b"), T).values, [1, 1])
    np.testing.assert_array_equal(encode_max(ts("d"), T).values, [4, -2])


def test_oov_uses_unk_vector():
    np.testing.assert_array_equal(encode_avg(ts("a", "zzz"), T).values, [0.5, 0.0])


def test_empty_sequence_rejected():
    for fn in (encode_avg, encode_max, encode_hier):
        with pytest.raises(DomainError):
            fn(ts(), T)


def test_hier_single_window_and_short_fallback():
    np.testing.assert_allclose(encode_hier(ts("a", "b", "c"), T).values, encode_avg(ts("a", "b", "c"), T).values)
    np.testing.assert_allclose(encode_hier(ts("a", "b"), T).values, encode_avg(ts("a", "b"), T).values)


def test_hier_four_tokens_hand_computed():
    # windows: mean(a,b,c) = [1, 1]; mean(b,c,d) = [2, 1/3]; elementwise max = [2, 1]
    np.testing.assert_allclose(encode_hier(ts("a", "b", "c", "d"), T, n=3).values, [2.0, 1.0])


def test_hier_bad_width():
    with pytest.raises(ConfigurationError):
        encode_hier(ts("a"), T, n=0)


def test_concat_layout_and_dims():
    u, v = encode_avg(ts("a", "b"), T), encode_max(ts("a", "b"), T)
    cat = encode_concat([u, v])
    assert cat.dim == 4
    np.testing.assert_array_equal(cat.values[:2], u.values)
    single = encode_concat([u])
    np.testing.assert_array_equal(single.values, u.values)


def test_concat_three_300d_parts_is_900d():
    parts = [SentenceEmbedding(np.zeros(300), k) for k in ("avg", "max", "hier")]
    assert encode_concat(parts).dim == 900
    assert native_spec("concat", 300).dim == 900


def test_concat_rejects_mixed_sentences():
    with pytest.raises(DomainError):
        encode_concat([SentenceEmbedding(np.zeros(2), "a", 0), SentenceEmbedding(np.zeros(2), "a", 1)])


def random_table(n_tokens, dim, seed):
    rng = np.random.default_rng(seed)
    return TokenEmbeddingTable(dim, {f"t{i}": rng.normal(size=dim) for i in range(n_tokens)}, rng.normal(size=dim))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 15), st.randoms(use_true_random=False))
def test_avg_and_max_bitwise_order_invariant(seed, length, rnd):
    table = random_table(20, 16, seed)
    toks = [f"t{rnd.randrange(20)}" for _ in range(length)]
    shuffled = toks[:]
    rnd.shuffle(shuffled)
    assert encode_avg(ts(*toks), table).values.tobytes() == encode_avg(ts(*shuffled), table).values.tobytes()
    assert encode_max(ts(*toks), table).values.tobytes() == encode_max(ts(*shuffled), table).values.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(0, 6))
def test_hier_is_order_sensitive(seed, n, extra):
    table = random_table(20, 16, seed)
    toks = [f"t{i}" for i in range(n + 1 + extra)]
    base = encode_hier(ts(*toks), table, n).values
    rng = random.Random(seed)
    found = False
    for _ in range(50):
        perm = toks[:]
        rng.shuffle(perm)
        if not np.array_equal(encode_hier(ts(*perm), table, n).values, base):
            found = True
            break
    assert found


def test_encoder_dimensional_consistency_and_determinism():
    table = random_table(10, 8, 0)
    for kind in ("avg", "max", "hier", "concat"):
        enc = Encoder(native_spec(kind, 8), table)
        e1 = enc.encode(ts("t1", "t2", "t3", "t4"))
        e2 = enc.encode(ts("t1", "t2", "t3", "t4"))
        assert e1.dim == enc.spec.dim
        assert e1.values.tobytes() == e2.values.tobytes()
        assert np.isfinite(e1.values).all()


def test_encoder_rejects_wrong_declared_dim():
    with pytest.raises(ConfigurationError):
        Encoder(EncoderSpec("x", "avg", 7), random_table(3, 8, 0))


def test_precomputed_text_lookup(tmp_path):
    mat = np.arange(12, dtype=float).reshape(3, 4)
    write_embedding_file(tmp_path / "e.txt", mat)
    spec = EncoderSpec("laser", "precomputed", 4, {"path": str(tmp_path / "e.txt")})
    np.testing.assert_array_equal(lookup_precomputed(spec, 1).values, mat[1])
    with pytest.raises(EmbeddingLookupError):
        lookup_precomputed(spec, 3)


def test_precomputed_1024_width(tmp_path):
    mat = np.random.default_rng(0).normal(size=(2, 1024))
    write_embedding_file(tmp_path / "laser.txt", mat)
    store = PrecomputedEmbeddings(tmp_path / "laser.txt", 1024)
    np.testing.assert_array_equal(store[1], mat[1])
    with pytest.raises(FormatError):
        PrecomputedEmbeddings(tmp_path / "laser.txt", 1023)


def test_binary_format_round_trip(tmp_path):
    mat = np.random.default_rng(1).normal(size=(5, 3)).astype(np.float32)
    write_embedding_file(tmp_path / "e.bin", mat, binary=True)
    raw = (tmp_path / "e.bin").read_bytes()
    assert raw[:8] == b"V2SEMB01"
    assert int.from_bytes(raw[8:16], "little") == 5
    assert int.from_bytes(raw[16:20], "little") == 3
    assert len(raw) == 20 + 5 * 3 * 4
    np.testing.assert_array_equal(read_embedding_file(tmp_path / "e.bin"), mat.astype(np.float64))


def test_binary_truncated(tmp_path):
    write_embedding_file(tmp_path / "e.bin", np.zeros((2, 2)), binary=True)
    (tmp_path / "e.bin").write_bytes((tmp_path / "e.bin").read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_embedding_file(tmp_path / "e.bin")


def test_ragged_text_file(tmp_path):
    (tmp_path / "e.txt").write_text("1 2\n3\n")
    with pytest.raises(FormatError):
        read_embedding_file(tmp_path / "e.txt")


def test_precomputed_encoder_uses_line_index(tmp_path):
    mat = np.eye(3)
    write_embedding_file(tmp_path / "e.txt", mat)
    enc = Encoder(EncoderSpec("sbert", "precomputed", 3, {"path": str(tmp_path / "e.txt")}))
    np.testing.assert_array_equal(enc.encode(ts("x", line=2)).values, [0, 0, 1])
    with pytest.raises(DomainError):
        enc.encode(ts("x"))


def test_token_table_loader(tmp_path):
    (tmp_path / "w.txt").write_text("3 2\nthe 1 2\ncat 3 4\n<unk> 9 9\n")
    tab = TokenEmbeddingTable.load(tmp_path / "w.txt")
    assert tab.dim == 2
    np.testing.assert_array_equal(tab.unk_vector, [9, 9])
    np.testing.assert_array_equal(encode_avg(ts("the", "cat"), tab).values, [2, 3])
