import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sentprobe.algebra import analogy, decode_vector, interpolate, interpolation_path, solve_analogies
from sentprobe.decoder import generate
from sentprobe.encoders import SentenceEmbedding
from sentprobe.errors import DimensionError, DomainError

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, 6, elements=finite)


def emb(v, eid="e"):
    return SentenceEmbedding(np.asarray(v, float), eid)


def test_interpolate_examples():
    x, y = emb([2.0, 0.0]), emb([0.0, 2.0])
    np.testing.assert_array_equal(interpolate(x, y, 0.5).values, [1.0, 1.0])
    assert interpolate(x, y, 1.0).values.tobytes() == x.values.tobytes()
    assert interpolate(x, y, 0.0).values.tobytes() == y.values.tobytes()
    assert interpolate(x, y, 0.3).encoder_id == "e"


@given(vec, vec)
def test_interpolate_endpoints_bitwise(x, y):
    assert interpolate(emb(x), emb(y), 1.0).values.tobytes() == x.tobytes()
    assert interpolate(emb(x), emb(y), 0.0).values.tobytes() == y.tobytes()


@given(vec, vec, st.floats(0.0, 1.0))
def test_interpolate_swap_symmetry_exact(x, y, a):
    left = interpolate(emb(x), emb(y), a).values
    right = interpolate(emb(y), emb(x), 1.0 - a).values
    assert left.tobytes() == right.tobytes()


def test_interpolate_guards():
    with pytest.raises(DomainError):
        interpolate(emb([1.0]), emb([2.0]), 1.5)
    np.testing.assert_allclose(interpolate(emb([1.0]), emb([2.0]), 2.0, extrapolate=True).values, [0.0])
    with pytest.raises(DimensionError):
        interpolate(emb([1.0]), emb([1.0, 2.0]), 0.5)
    with pytest.raises(DomainError):
        interpolate(emb([1.0], "a"), emb([1.0], "b"), 0.5)


def test_interpolation_path_ends():
    path = interpolation_path(emb([1.0, 1.0]), emb([0.0, 0.0]), 3)
    assert [a for a, _ in path] == [0.0, 0.5, 1.0]
    np.testing.assert_array_equal(path[0][1].values, [0.0, 0.0])


def test_analogy_examples():
    r, s = emb([1.0, 2.0]), emb([3.0, -1.0])
    np.testing.assert_array_equal(analogy(r, s, s).values, r.values)
    np.testing.assert_array_equal(analogy(r, r, s).values, s.values)


@given(vec, vec, vec)
def test_analogy_inverts(r, s, v):
    u = analogy(emb(r), emb(s), emb(v)).values
    scale = max(np.abs(r).max(), np.abs(s).max(), np.abs(v).max(), 1.0)
    np.testing.assert_allclose(u + s - v, r, rtol=1e-6, atol=1e-6 * scale)


def test_decode_vector_delegates_and_validates(desk):
    ckpt, enc = desk["checkpoint"], desk["encoder"]
    e = enc.encode(desk["data"].train[3])
    assert decode_vector(ckpt, e).output == generate(ckpt, e).output
    assert decode_vector(ckpt, e.values).output == generate(ckpt, e).output
    assert decode_vector(ckpt, interpolate(e, e, 0.3)).output == decode_vector(ckpt, e).output
    with pytest.raises(DomainError):
        decode_vector(ckpt, np.full(e.dim, np.nan))
    with pytest.raises(DimensionError):
        decode_vector(ckpt, np.zeros(e.dim + 1))


def test_decode_arbitrary_vector_is_deterministic(desk):
    ckpt = desk["checkpoint"]
    u = np.random.default_rng(5).normal(size=ckpt.config.cond_dim)
    assert decode_vector(ckpt, u).output == decode_vector(ckpt, u).output


def test_solve_analogies(desk):
    from sentprobe.corpus import tokenize

    vocab, enc = desk["data"].vocab, desk["encoder"]
    encode = lambda text: enc.encode(vocab.encode(tokenize(text)))  # noqa: E731
    out = solve_analogies(desk["checkpoint"], encode, [{"a": "the cat sees this house", "b": "the cat sees this car", "c": "a dog sees this car"}])
    assert set(out[0]) == {"a", "b", "c", "z_text"}
    assert isinstance(out[0]["z_text"], str)
