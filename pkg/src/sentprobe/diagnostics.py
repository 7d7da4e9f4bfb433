"""Reconstruction diagnostics: exact identity, bag-of-words permutation, BLEU and an injected soft metric."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import TokenSequence, tokenize
from .errors import DimensionError, DomainError, VocabularyMismatchError

log = logging.getLogger(__name__)

PairScorer = Callable[[str, str], float]


@dataclass(frozen=True)
class SentencePair:
    x: TokenSequence
    y: TokenSequence


@dataclass
class DiagnosticReport:
    """Rates are stored as fractions; :meth:`to_dict` emits percentages."""

    encoder_id: str
    n_pairs: int
    id_rate: float
    perm_rate: float
    id_over_perm: float | None
    bleu: float
    mover: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        pct = lambda v: None if v is None else round(100.0 * v, 2)  # noqa: E731
        out = {
            "encoder_id": self.encoder_id,
            "n_pairs": self.n_pairs,
            "id_rate": pct(self.id_rate),
            "perm_rate": pct(self.perm_rate),
            "id_over_perm": pct(self.id_over_perm),
            "bleu": round(self.bleu, 2),
        }
        if self.mover is not None:
            out["mover"] = round(self.mover, 2)
        return out

    def metric(self, name: str) -> float | None:
        """Metric on the percentage scale used by the score tables."""
        return {
            "BLEU": self.bleu,
            "Mover": self.mover,
            "PERM": 100.0 * self.perm_rate,
            "Id": 100.0 * self.id_rate,
            "Id/PERM": None if self.id_over_perm is None else 100.0 * self.id_over_perm,
        }[name]


DIAGNOSTICS = ("BLEU", "Mover", "PERM", "Id", "Id/PERM")


def _tokens(seq) -> tuple:
    return tuple(seq.tokens) if isinstance(seq, TokenSequence) else tuple(seq)


def is_id(x, y) -> bool:
    return _tokens(x) == _tokens(y)


def is_perm(x, y) -> bool:
    return Counter(_tokens(x)) == Counter(_tokens(y))


def rates(pairs: Sequence[SentencePair]) -> dict:
    if not pairs:
        raise DomainError("rates need at least one pair")
    n = len(pairs)
    n_id = sum(is_id(p.x, p.y) for p in pairs)
    n_perm = sum(is_perm(p.x, p.y) for p in pairs)
    return {
        "id_rate": n_id / n,
        "perm_rate": n_perm / n,
        "id_over_perm": n_id / n_perm if n_perm else None,
    }


def _ngram_counts(tokens: tuple, n: int) -> Counter:
    return Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))


def bleu(x, y, max_n: int = 4) -> float:
    """Sentence BLEU of hypothesis ``y`` against the single reference ``x``, in [0, 100].

    Unigram precision is unsmoothed; higher orders use add-one smoothing.
    Orders longer than the hypothesis are left out of the geometric mean.
    """
    ref, hyp = _tokens(x), _tokens(y)
    if not hyp:
        return 0.0
    log_p = []
    for n in range(1, min(max_n, len(hyp)) + 1):
        hyp_counts = _ngram_counts(hyp, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = sum(hyp_counts.values())
        if n == 1:
            if matches == 0:
                return 0.0
            log_p.append(math.log(matches / total))
        else:
            log_p.append(math.log((matches + 1) / (total + 1)))
    c, r = len(hyp), len(ref)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return 100.0 * bp * math.exp(sum(log_p) / len(log_p))


def avg_bleu(pairs: Sequence[SentencePair]) -> float:
    if not pairs:
        raise DomainError("avg_bleu needs at least one pair")
    return math.fsum(bleu(p.x, p.y) for p in pairs) / len(pairs)


def mover_adapter(scorer: PairScorer | None, pairs: Sequence[SentencePair]) -> tuple[float | None, int]:
    """Mean external score over pairs and the number of pairs the scorer failed on.

    Returns ``(None, 0)`` when no scorer is configured.
    """
    if scorer is None:
        return None, 0
    scores, failures = [], 0
    for p in pairs:
        try:
            scores.append(float(scorer(p.x.text, p.y.text)))
        except Exception as exc:  # scorer is third-party code
            failures += 1
            log.warning("mover scorer failed on %r: %s", p.x.text, exc)
    if not scores:
        return None, failures
    return math.fsum(scores) / len(scores), failures


def report_from_pairs(encoder_id: str, pairs: Sequence[SentencePair], scorer: PairScorer | None = None) -> DiagnosticReport:
    r = rates(pairs)
    mover, failures = mover_adapter(scorer, pairs)
    return DiagnosticReport(
        encoder_id=encoder_id,
        n_pairs=len(pairs),
        bleu=avg_bleu(pairs),
        mover=mover,
        meta={"mover_failures": failures},
        **r,
    )


def diagnose(
    checkpoint,
    encoder,
    eval_corpus: Sequence[TokenSequence],
    scorer: PairScorer | None = None,
    vocab=None,
    batch_size: int = 256,
):
    """Encode, decode and score every sentence; returns ``(report, pairs)``.

    ``vocab`` is the vocabulary the evaluation corpus was prepared with; it
    must match the checkpoint's.
    """
    from .decoder import generate_batch

    if vocab is not None and vocab.digest() != checkpoint.vocab_hash:
        raise VocabularyMismatchError("evaluation vocabulary differs from the checkpoint's")
    if checkpoint.encoder_id != encoder.encoder_id:
        log.warning("checkpoint encoder %r differs from %r", checkpoint.encoder_id, encoder.encoder_id)
    if encoder.dim != checkpoint.config.cond_dim:
        raise DimensionError(f"encoder dim {encoder.dim} != decoder cond_dim {checkpoint.config.cond_dim}")
    if not eval_corpus:
        raise DomainError("evaluation corpus is empty")
    conds = encoder.encode_many(eval_corpus)
    results = generate_batch(checkpoint, conds, batch_size=batch_size, sources=eval_corpus)
    pairs = [SentencePair(src, res.output) for src, res in zip(eval_corpus, results)]
    return report_from_pairs(encoder.encoder_id, pairs, scorer), pairs


def write_pairs(path: str | Path, pairs: Iterable[SentencePair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({"input": p.x.text, "output": p.y.text}, ensure_ascii=False) + "\n")


def read_pairs(path: str | Path, lowercase: bool = True, tokenizer=None) -> list[SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pairs.append(SentencePair(tokenize(rec["input"], lowercase, tokenizer), tokenize(rec["output"], lowercase, tokenizer)))
    return pairs
