"""Sentence encoders: pooled token embeddings plus an adapter for precomputed vectors."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .corpus import SPECIALS, TokenSequence, Vocabulary
from .errors import ConfigurationError, DimensionError, DomainError, EmbeddingLookupError, FormatError

BINARY_MAGIC = b"V2SEMB01"
_HEADER = struct.Struct("<8sQI")

KINDS = ("avg", "max", "hier", "concat", "precomputed")


@dataclass
class TokenEmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    unk_vector: np.ndarray

    def __post_init__(self):
        self.unk_vector = np.asarray(self.unk_vector, dtype=np.float64)
        if self.unk_vector.shape != (self.dim,):
            raise DimensionError(f"unk vector has shape {self.unk_vector.shape}, expected ({self.dim},)")
        for tok, vec in self.vectors.items():
            if len(vec) != self.dim:
                raise DimensionError(f"vector for {tok!r} has length {len(vec)}, expected {self.dim}")

    def matrix(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self.vectors.get(t, self.unk_vector) for t in tokens])

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int, seed: int = 0, scale: float = 1.0) -> "TokenEmbeddingTable":
        """Fixed Gaussian vectors for every non-special vocabulary token."""
        rng = np.random.default_rng(seed)
        words = [t for t in vocab.id_to_token if t not in SPECIALS]
        mat = rng.normal(0.0, scale, size=(len(words) + 1, dim))
        return cls(dim, {t: mat[i] for i, t in enumerate(words)}, mat[-1])

    @classmethod
    def load(cls, path: str | Path, unk_token: str = "<unk>") -> "TokenEmbeddingTable":
        """Read word2vec-style text: ``token v1 ... vd`` per line, optional ``count dim`` header."""
        vectors: dict[str, np.ndarray] = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh):
                parts = line.rstrip("\n").split(" ")
                if n == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                if not parts or parts == [""]:
                    continue
                vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise FormatError(f"{path}:{n + 1}: expected {dim} values, got {len(vec)}")
                vectors[parts[0]] = vec
        if dim is None:
            raise FormatError(f"{path}: no vectors")
        unk = vectors.pop(unk_token, np.zeros(dim))
        return cls(dim, vectors, unk)


@dataclass(frozen=True)
class SentenceEmbedding:
    values: np.ndarray
    encoder_id: str
    source_line: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise DimensionError("sentence embedding must be a 1-d vector")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class EncoderSpec:
    encoder_id: str
    kind: str
    dim: int
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown encoder kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise ConfigurationError("encoder dim must be positive")

    def to_dict(self) -> dict:
        return {"encoder_id": self.encoder_id, "kind": self.kind, "dim": self.dim, "parameters": dict(self.parameters)}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(d["encoder_id"], d["kind"], int(d["dim"]), dict(d.get("parameters", {})))


def _check_nonempty(tokens: TokenSequence):
    if len(tokens) == 0:
        raise DomainError("cannot encode an empty token sequence")


def _mean_rows(mat: np.ndarray) -> np.ndarray:
    # sorting each column fixes the summation order, so the mean is bitwise
    # invariant under any permutation of the rows
    return np.sort(mat, axis=0).sum(axis=0) / mat.shape[0]


def encode_avg(tokens: TokenSequence, table: TokenEmbeddingTable, encoder_id: str = "avg") -> SentenceEmbedding:
    _check_nonempty(tokens)
    return SentenceEmbedding(_mean_rows(table.matrix(tokens.tokens)), encoder_id, tokens.line_index)


def encode_max(tokens: TokenSequence, table: TokenEmbeddingTable, encoder_id: str = "max") -> SentenceEmbedding:
    _check_nonempty(tokens)
    return SentenceEmbedding(table.matrix(tokens.tokens).max(axis=0), encoder_id, tokens.line_index)


def encode_hier(
    tokens: TokenSequence, table: TokenEmbeddingTable, n: int = 3, encoder_id: str = "hier"
) -> SentenceEmbedding:
    """Max over the means of every width-``n`` window (stride 1).

    Sentences shorter than ``n`` form a single window.
    """
    if n < 1:
        raise ConfigurationError("window width n must be >= 1")
    _check_nonempty(tokens)
    mat = table.matrix(tokens.tokens)
    if len(mat) <= n:
        return SentenceEmbedding(mat.mean(axis=0), encoder_id, tokens.line_index)
    windows = np.lib.stride_tricks.sliding_window_view(mat, n, axis=0)  # (L-n+1, d, n)
    return SentenceEmbedding(windows.mean(axis=2).max(axis=0), encoder_id, tokens.line_index)


def encode_concat(parts: Sequence[SentenceEmbedding], encoder_id: str | None = None) -> SentenceEmbedding:
    if not parts:
        raise DomainError("concat needs at least one part")
    lines = {p.source_line for p in parts}
    if len(lines) > 1:
        raise DomainError(f"concat parts come from different sentences: {sorted(lines, key=str)}")
    eid = encoder_id or "+".join(p.encoder_id for p in parts)
    return SentenceEmbedding(np.concatenate([p.values for p in parts]), eid, parts[0].source_line)


class PrecomputedEmbeddings:
    """Line-aligned embeddings produced by an external encoder.

    The file is parsed eagerly so lookups are read-only and thread-safe.
    """

    def __init__(self, path: str | Path, dim: int):
        self.path = Path(path)
        self.dim = dim
        self.matrix = read_embedding_file(self.path)
        if self.matrix.shape[0] and self.matrix.shape[1] != dim:
            raise FormatError(f"{self.path}: vectors have width {self.matrix.shape[1]}, declared dim is {dim}")

    def __len__(self):
        return self.matrix.shape[0]

    def __getitem__(self, line_index: int) -> np.ndarray:
        if not 0 <= line_index < len(self):
            raise EmbeddingLookupError(f"line {line_index} out of range for {self.path} ({len(self)} vectors)")
        return self.matrix[line_index]


def lookup_precomputed(spec: EncoderSpec, line_index: int, store: PrecomputedEmbeddings | None = None) -> SentenceEmbedding:
    if spec.kind != "precomputed":
        raise ConfigurationError(f"encoder {spec.encoder_id!r} is not precomputed")
    store = store or PrecomputedEmbeddings(spec.parameters["path"], spec.dim)
    return SentenceEmbedding(store[line_index].copy(), spec.encoder_id, line_index)


def read_embedding_file(path: str | Path) -> np.ndarray:
    """Load a text or binary embedding file; the format is detected from the magic bytes."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return _read_binary(path)
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                raise FormatError(f"{path}:{n + 1}: empty line breaks line alignment")
            try:
                row = [float(v) for v in line.split()]
            except ValueError as exc:
                raise FormatError(f"{path}:{n + 1}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(f"{path}:{n + 1}: expected {width} values, got {len(row)}")
            rows.append(row)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=np.float64)


def _read_binary(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    _, count, dim = _HEADER.unpack_from(data)
    expected = _HEADER.size + count * dim * 4
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {count}x{dim}, found {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return arr.astype(np.float64)


def write_embedding_file(path: str | Path, matrix: np.ndarray, binary: bool = False) -> None:
    matrix = np.asarray(matrix)
    if binary:
        count, dim = matrix.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(BINARY_MAGIC, count, dim))
            fh.write(matrix.astype("<f4").tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for row in matrix:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


class Encoder:
    """A frozen encoder built from an :class:`EncoderSpec`."""

    def __init__(self, spec: EncoderSpec, table: TokenEmbeddingTable | None = None):
        self.spec = spec
        self.table = table
        self._store = None
        if spec.kind == "precomputed":
            self._store = PrecomputedEmbeddings(spec.parameters["path"], spec.dim)
            return
        if table is None:
            raise ConfigurationError(f"encoder kind {spec.kind!r} needs a token embedding table")
        parts = spec.parameters.get("parts", ["avg", "max", "hier"]) if spec.kind == "concat" else [spec.kind]
        expected = table.dim * len(parts)
        if spec.dim != expected:
            raise ConfigurationError(f"encoder {spec.encoder_id!r} declares dim {spec.dim}, pooling yields {expected}")
        self._parts = parts
        self._n = int(spec.parameters.get("n", 3))

    @property
    def encoder_id(self) -> str:
        return self.spec.encoder_id

    @property
    def dim(self) -> int:
        return self.spec.dim

    def _pool(self, kind: str, tokens: TokenSequence) -> SentenceEmbedding:
        if kind == "avg":
            return encode_avg(tokens, self.table)
        if kind == "max":
            return encode_max(tokens, self.table)
        if kind == "hier":
            return encode_hier(tokens, self.table, self._n)
        raise ConfigurationError(f"unknown pooling part {kind!r}")

    def encode(self, tokens: TokenSequence) -> SentenceEmbedding:
        if self._store is not None:
            if tokens.line_index is None:
                raise DomainError("precomputed encoder needs the sentence's line_index")
            return lookup_precomputed(self.spec, tokens.line_index, self._store)
        if len(self._parts) == 1:
            emb = self._pool(self._parts[0], tokens)
        else:
            emb = encode_concat([self._pool(k, tokens) for k in self._parts])
        return SentenceEmbedding(emb.values, self.encoder_id, tokens.line_index)

    def encode_many(self, corpus: Sequence[TokenSequence]) -> np.ndarray:
        if not corpus:
            return np.zeros((0, self.dim))
        return np.stack([self.encode(t).values for t in corpus])


def native_spec(kind: str, token_dim: int, encoder_id: str | None = None, n: int = 3) -> EncoderSpec:
    """Spec for one of the pooled encoders; ``concat`` is avg+max+hier."""
    if kind == "concat":
        return EncoderSpec(encoder_id or "avg+max+hier", "concat", 3 * token_dim, {"parts": ["avg", "max", "hier"], "n": n})
    params = {"n": n} if kind == "hier" else {}
    return EncoderSpec(encoder_id or kind, kind, token_dim, params)
