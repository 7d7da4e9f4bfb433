"""Interpolation and analogy arithmetic on sentence embeddings, decoded back to text."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoders import SentenceEmbedding
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class AnalogyQuery:
    """``a : b :: z : c``; z is decoded from enc(a) - enc(b) + enc(c)."""

    a_text: str
    b_text: str
    c_text: str
    r: SentenceEmbedding
    s: SentenceEmbedding
    v: SentenceEmbedding


def _check_compatible(*embs: SentenceEmbedding) -> None:
    dims = {e.dim for e in embs}
    if len(dims) != 1:
        raise DimensionError(f"embeddings differ in dimension: {sorted(dims)}")
    ids = {e.encoder_id for e in embs}
    if len(ids) != 1:
        raise DomainError(f"embeddings come from different encoders: {sorted(ids)}")


def interpolate(x: SentenceEmbedding, y: SentenceEmbedding, alpha: float, extrapolate: bool = False) -> SentenceEmbedding:
    """``alpha * x + (1 - alpha) * y``.

    The weight pair is derived so that ``interpolate(x, y, a)`` and
    ``interpolate(y, x, 1 - a)`` are bitwise equal, and the endpoints
    return the inputs unchanged.
    """
    _check_compatible(x, y)
    if not np.isfinite(alpha):
        raise DomainError("alpha must be finite")
    if not extrapolate and not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha={alpha} outside [0, 1]; pass extrapolate=True to allow it")
    if alpha == 1.0:
        return SentenceEmbedding(x.values.copy(), x.encoder_id)
    if alpha == 0.0:
        return SentenceEmbedding(y.values.copy(), x.encoder_id)
    w_y = 1.0 - alpha
    if w_y == 1.0:  # alpha below half an ulp of 1
        return SentenceEmbedding(y.values.copy(), x.encoder_id)
    # for alpha >= 0.5 the subtraction is exact; below, recover w_x from the rounded w_y
    w_x = alpha if alpha >= 0.5 else 1.0 - w_y
    return SentenceEmbedding(w_x * x.values + w_y * y.values, x.encoder_id)


def interpolation_path(x: SentenceEmbedding, y: SentenceEmbedding, steps: int) -> list[tuple[float, SentenceEmbedding]]:
    """``steps`` evenly spaced points from y (alpha=0) to x (alpha=1)."""
    if steps < 2:
        raise DomainError("need at least 2 steps")
    return [(float(a), interpolate(x, y, float(a))) for a in np.linspace(0.0, 1.0, steps)]


def analogy(r: SentenceEmbedding, s: SentenceEmbedding, v: SentenceEmbedding) -> SentenceEmbedding:
    _check_compatible(r, s, v)
    return SentenceEmbedding(r.values - s.values + v.values, r.encoder_id)


def decode_vector(checkpoint, u, beam_size: int = 1):
    """Decode an arbitrary finite vector with the checkpoint's decoder."""
    from .decoder import generate

    values = u.values if isinstance(u, SentenceEmbedding) else np.asarray(u, dtype=np.float64)
    if values.ndim != 1:
        raise DimensionError("expected a single vector")
    if not np.isfinite(values).all():
        raise DomainError("vector contains NaN or infinite entries")
    if values.shape[0] != checkpoint.config.cond_dim:
        raise DimensionError(f"vector has dim {values.shape[0]}, decoder expects {checkpoint.config.cond_dim}")
    return generate(checkpoint, values, beam_size=beam_size)


def read_analogy_queries(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"a", "b", "c"} - set(rec)
            if missing:
                raise DomainError(f"{path}:{n + 1}: missing fields {sorted(missing)}")
            out.append(rec)
    return out


def solve_analogies(checkpoint, encode, queries: Iterable[dict]) -> list[dict]:
    """``encode`` maps text to a SentenceEmbedding; returns records with ``z_text`` added."""
    out = []
    for q in queries:
        u = analogy(encode(q["a"]), encode(q["b"]), encode(q["c"]))
        out.append({"a": q["a"], "b": q["b"], "c": q["c"], "z_text": decode_vector(checkpoint, u).output.text})
    return out


def sweep(checkpoint, x: SentenceEmbedding, y: SentenceEmbedding, alphas: Sequence[float]) -> list[dict]:
    return [{"alpha": float(a), "text": decode_vector(checkpoint, interpolate(x, y, a)).output.text} for a in alphas]
