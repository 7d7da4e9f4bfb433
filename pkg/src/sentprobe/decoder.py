"""Conditional recurrent language model that reconstructs sentences from embeddings."""

from __future__ import annotations

import io
import json
import logging
import time
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import EOS_ID, PAD_ID, SOS_ID, TokenSequence, Vocabulary
from .encoders import Encoder, SentenceEmbedding
from .errors import ConfigurationError, DimensionError, DomainError, TrainingError, VocabularyMismatchError

log = logging.getLogger(__name__)

CONDITIONING = ("concat", "init_state")
HEADS = ("softmax", "mos")


@dataclass
class DecoderConfig:
    vocab_size: int
    cond_dim: int
    word_dim: int = 256
    hidden_dim: int = 1024
    num_layers: int = 3
    conditioning: str = "concat"
    head: str = "mos"
    mos_components: int = 5
    max_gen_len: int = 20

    def validate(self) -> None:
        for name in ("vocab_size", "cond_dim", "word_dim", "hidden_dim", "num_layers", "max_gen_len"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.vocab_size < 5:
            raise ConfigurationError("vocab_size must cover the 4 specials plus at least one token")
        if self.conditioning not in CONDITIONING:
            raise ConfigurationError(f"conditioning must be one of {CONDITIONING}")
        if self.head not in HEADS:
            raise ConfigurationError(f"head must be one of {HEADS}")
        if self.head == "mos" and self.mos_components < 1:
            raise ConfigurationError("mos_components must be >= 1")

    @property
    def rnn_input_dim(self) -> int:
        return self.word_dim + (self.cond_dim if self.conditioning == "concat" else 0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DecoderConfig":
        return cls(**d)


class SoftmaxHead(nn.Module):
    def __init__(self, hidden_dim: int, vocab_size: int):
        super().__init__()
        self.proj = nn.Linear(hidden_dim, vocab_size)

    def log_probs(self, hidden: torch.Tensor) -> torch.Tensor:
        return F.log_softmax(self.proj(hidden), dim=-1)


class MixtureOfSoftmaxes(nn.Module):
    """K tanh context vectors, each through a shared output layer, mixed by a softmax gate."""

    def __init__(self, hidden_dim: int, vocab_size: int, n_components: int, context_dim: int):
        super().__init__()
        self.k = n_components
        self.context_dim = context_dim
        self.gate = nn.Linear(hidden_dim, n_components)
        self.context = nn.Linear(hidden_dim, n_components * context_dim)
        self.out = nn.Linear(context_dim, vocab_size)

    def mixture_weights(self, hidden: torch.Tensor) -> torch.Tensor:
        return F.softmax(self.gate(hidden), dim=-1)

    def component_log_probs(self, hidden: torch.Tensor) -> torch.Tensor:
        ctx = torch.tanh(self.context(hidden)).view(*hidden.shape[:-1], self.k, self.context_dim)
        return F.log_softmax(self.out(ctx), dim=-1)  # (..., K, V)

    def log_probs(self, hidden: torch.Tensor) -> torch.Tensor:
        log_pi = F.log_softmax(self.gate(hidden), dim=-1).unsqueeze(-1)
        return torch.logsumexp(log_pi + self.component_log_probs(hidden), dim=-2)

    def distribution(self, hidden: torch.Tensor) -> torch.Tensor:
        """Mixed next-token probabilities, computed directly as sum_k pi_k * softmax_k."""
        pi = self.mixture_weights(hidden).unsqueeze(-1)
        return (pi * self.component_log_probs(hidden).exp()).sum(dim=-2)


class ConditionalLM(nn.Module):
    def __init__(self, config: DecoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        c = config
        self.embed = nn.Embedding(c.vocab_size, c.word_dim, padding_idx=PAD_ID)
        self.rnn = nn.LSTM(c.rnn_input_dim, c.hidden_dim, c.num_layers, batch_first=True)
        if c.conditioning == "init_state":
            # one map per layer
            self.init_maps = nn.ModuleList(nn.Linear(c.cond_dim, c.hidden_dim) for _ in range(c.num_layers))
        if c.head == "mos":
            self.head = MixtureOfSoftmaxes(c.hidden_dim, c.vocab_size, c.mos_components, c.word_dim)
        else:
            self.head = SoftmaxHead(c.hidden_dim, c.vocab_size)

    def _check_cond(self, cond: torch.Tensor) -> None:
        if cond.shape[-1] != self.config.cond_dim:
            raise DimensionError(f"conditioning vector has dim {cond.shape[-1]}, decoder expects {self.config.cond_dim}")

    def initial_state(self, cond: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        self._check_cond(cond)
        c = self.config
        batch = cond.shape[0]
        zeros = cond.new_zeros(c.num_layers, batch, c.hidden_dim)
        if c.conditioning == "init_state":
            h0 = torch.stack([m(cond) for m in self.init_maps])
            return h0, zeros
        return zeros, zeros.clone()

    def _inputs(self, ids: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        x = self.embed(ids)
        if self.config.conditioning == "concat":
            x = torch.cat([x, cond.unsqueeze(1).expand(-1, ids.shape[1], -1)], dim=-1)
        return x

    def forward(self, ids: torch.Tensor, cond: torch.Tensor, hidden=None):
        """Log-probabilities for every position of ``ids`` (batch, time)."""
        self._check_cond(cond)
        if hidden is None:
            hidden = self.initial_state(cond)
        out, hidden = self.rnn(self._inputs(ids, cond), hidden)
        return self.head.log_probs(out), hidden

    def loss(self, ids: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """Mean token cross-entropy of ``ids`` (SOS ... EOS PAD*) under teacher forcing."""
        logp, _ = self(ids[:, :-1], cond)
        return F.nll_loss(logp.reshape(-1, logp.shape[-1]), ids[:, 1:].reshape(-1), ignore_index=PAD_ID)


def init_decoder(config: DecoderConfig, seed: int = 0) -> ConditionalLM:
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ConditionalLM(config)
    model.eval()
    return model


def _as_cond(cond, dtype=torch.float32) -> torch.Tensor:
    if isinstance(cond, SentenceEmbedding):
        cond = cond.values
    t = torch.from_numpy(np.array(cond, dtype=np.float64)).to(dtype)
    if not torch.isfinite(t).all():
        raise DomainError("conditioning vector contains non-finite values")
    return t


@torch.no_grad()
def step(model: ConditionalLM, prev_token_id, hidden, cond):
    """One decoding step; returns ``(probabilities, new_hidden)``.

    ``prev_token_id`` is an int or a (batch,) tensor and ``cond`` a single
    vector or a (batch, d) matrix. With ``hidden=None`` the state is
    initialised from ``cond``. After that, init_state models ignore ``cond``;
    concat models append it to the word embedding at every step.
    """
    dtype = next(model.parameters()).dtype
    cond_t = _as_cond(cond, dtype)
    single = cond_t.dim() == 1
    if single:
        cond_t = cond_t.unsqueeze(0)
    model._check_cond(cond_t)
    prev = torch.as_tensor(prev_token_id, dtype=torch.long).reshape(-1, 1)
    if hidden is None:
        hidden = model.initial_state(cond_t)
    elif hidden[0].shape != (model.config.num_layers, prev.shape[0], model.config.hidden_dim):
        raise DimensionError(f"hidden state has shape {tuple(hidden[0].shape)}")
    logp, hidden = model(prev, cond_t, hidden)
    probs = logp[:, -1].exp()
    return (probs[0] if single else probs), hidden


@dataclass
class GenerationResult:
    output: TokenSequence
    terminated: bool
    input: TokenSequence | None = None


@dataclass
class TrainHyper:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    seed: int = 0


@dataclass
class DecoderCheckpoint:
    config: DecoderConfig
    model: ConditionalLM
    vocab: Vocabulary
    encoder_id: str
    training_meta: dict = field(default_factory=dict)

    @property
    def vocab_hash(self) -> str:
        return self.vocab.digest()

    def save(self, path: str | Path) -> None:
        """Zip container: config.json, meta.json and weights.pt."""
        buf = io.BytesIO()
        torch.save(self.model.state_dict(), buf)
        meta = {"vocab_hash": self.vocab_hash, "encoder_id": self.encoder_id, "training_meta": self.training_meta}
        entries = {
            "config.json": self.config.to_json().encode(),
            "meta.json": json.dumps(meta, sort_keys=True).encode(),
            "weights.pt": buf.getvalue(),
        }
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            for name, data in entries.items():
                # fixed timestamp keeps the file byte-identical across runs
                zf.writestr(zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0)), data, zipfile.ZIP_DEFLATED)

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary) -> "DecoderCheckpoint":
        with zipfile.ZipFile(path) as zf:
            config = DecoderConfig.from_dict(json.loads(zf.read("config.json")))
            meta = json.loads(zf.read("meta.json"))
            weights = zf.read("weights.pt")
        if meta["vocab_hash"] != vocab.digest():
            raise VocabularyMismatchError(f"{path}: checkpoint was trained with a different vocabulary")
        if len(vocab) != config.vocab_size:
            raise VocabularyMismatchError(f"{path}: vocabulary size {len(vocab)} != {config.vocab_size}")
        model = ConditionalLM(config)
        model.load_state_dict(torch.load(io.BytesIO(weights), weights_only=True))
        model.eval()
        return cls(config, model, vocab, meta["encoder_id"], meta.get("training_meta", {}))


def _batch_ids(seqs: Sequence[TokenSequence]) -> torch.Tensor:
    longest = max(len(s) for s in seqs) + 2
    out = torch.full((len(seqs), longest), PAD_ID, dtype=torch.long)
    for i, s in enumerate(seqs):
        row = [SOS_ID, *s.ids, EOS_ID]
        out[i, : len(row)] = torch.tensor(row)
    return out


def train(
    model: ConditionalLM,
    encoder: Encoder,
    corpus: Sequence[TokenSequence],
    vocab: Vocabulary,
    hyper: TrainHyper | None = None,
    log_path: str | Path | None = None,
) -> DecoderCheckpoint:
    """Teacher-forced training of ``model`` to reproduce each sentence from its embedding.

    The encoder is frozen: embeddings are computed once up front.
    """
    hyper = hyper or TrainHyper()
    if not corpus:
        raise DomainError("training corpus is empty")
    if encoder.dim != model.config.cond_dim:
        raise DimensionError(f"encoder dim {encoder.dim} != decoder cond_dim {model.config.cond_dim}")
    seqs = [s if s.ids is not None else vocab.encode(s) for s in corpus]
    if any(len(s) == 0 for s in seqs):
        raise DomainError("training corpus contains an empty sentence")
    dtype = next(model.parameters()).dtype
    conds = torch.as_tensor(encoder.encode_many(seqs), dtype=dtype)
    if not torch.isfinite(conds).all():
        raise TrainingError("encoder produced non-finite embeddings")

    gen = torch.Generator().manual_seed(hyper.seed)
    opt = torch.optim.Adam(model.parameters(), lr=hyper.learning_rate)
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    losses = []
    model.train()
    try:
        for epoch in range(1, hyper.epochs + 1):
            t0 = time.perf_counter()
            order = torch.randperm(len(seqs), generator=gen).tolist()
            total, tokens = 0.0, 0
            for start in range(0, len(order), hyper.batch_size):
                idx = order[start : start + hyper.batch_size]
                ids = _batch_ids([seqs[i] for i in idx])
                loss = model.loss(ids, conds[idx])
                if not torch.isfinite(loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {start}")
                opt.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.parameters(), hyper.clip_norm)
                opt.step()
                n_tok = int((ids[:, 1:] != PAD_ID).sum())
                total += loss.item() * n_tok
                tokens += n_tok
            mean_loss = total / tokens
            losses.append(mean_loss)
            record = {"epoch": epoch, "mean_loss": mean_loss, "wall_seconds": time.perf_counter() - t0}
            log.info("epoch %d loss %.4f", epoch, mean_loss)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
    finally:
        model.eval()
        if log_fh:
            log_fh.close()
    meta = {"corpus_size": len(seqs), "epochs": hyper.epochs, "final_loss": losses[-1], "epoch_losses": losses}
    return DecoderCheckpoint(model.config, model, vocab, encoder.encoder_id, meta)


@torch.no_grad()
def greedy_ids(model: ConditionalLM, conds: torch.Tensor, max_len: int | None = None) -> list[tuple[list[int], bool]]:
    max_len = max_len or model.config.max_gen_len
    batch = conds.shape[0]
    hidden = model.initial_state(conds)
    prev = torch.full((batch, 1), SOS_ID, dtype=torch.long)
    outputs = [[] for _ in range(batch)]
    done = [False] * batch
    for _ in range(max_len + 1):
        logp, hidden = model(prev, conds, hidden)
        nxt = logp[:, -1].argmax(dim=-1)
        for i, tok in enumerate(nxt.tolist()):
            if done[i]:
                continue
            if tok == EOS_ID:
                done[i] = True
            elif len(outputs[i]) < max_len:
                outputs[i].append(tok)
        if all(done) or all(d or len(o) >= max_len for d, o in zip(done, outputs)):
            break
        prev = nxt.unsqueeze(1)
    return list(zip(outputs, done))


@torch.no_grad()
def beam_ids(model: ConditionalLM, cond: torch.Tensor, beam_size: int, max_len: int | None = None) -> tuple[list[int], bool]:
    """Beam search for a single conditioning vector (length-unnormalised log-prob)."""
    max_len = max_len or model.config.max_gen_len
    cond = cond.reshape(1, -1)
    hidden = model.initial_state(cond)
    beams = [(0.0, [], hidden, False)]
    for _ in range(max_len + 1):
        live = [b for b in beams if not b[3] and len(b[1]) < max_len]
        if not live:
            break
        candidates = [b for b in beams if b[3] or len(b[1]) >= max_len]
        for score, toks, h, _ in live:
            prev = torch.tensor([[toks[-1] if toks else SOS_ID]])
            logp, h2 = model(prev, cond, h)
            top = torch.topk(logp[0, -1], beam_size)
            for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                if tok == EOS_ID:
                    candidates.append((score + lp, toks, h2, True))
                elif tok not in (PAD_ID, SOS_ID):
                    candidates.append((score + lp, toks + [tok], h2, False))
        beams = sorted(candidates, key=lambda b: -b[0])[:beam_size]
    best = beams[0]
    return best[1], best[3]


def _to_result(vocab: Vocabulary, ids: list[int], terminated: bool, source: TokenSequence | None) -> GenerationResult:
    return GenerationResult(vocab.decode(ids), terminated, source)


def generate(checkpoint: DecoderCheckpoint, cond, beam_size: int = 1, source: TokenSequence | None = None) -> GenerationResult:
    """Decode one vector; greedy unless ``beam_size > 1``."""
    model = checkpoint.model
    dtype = next(model.parameters()).dtype
    c = _as_cond(cond, dtype).reshape(1, -1)
    model._check_cond(c)
    if beam_size > 1:
        ids, term = beam_ids(model, c, beam_size)
    else:
        ids, term = greedy_ids(model, c)[0]
    return _to_result(checkpoint.vocab, ids, term, source)


def generate_batch(
    checkpoint: DecoderCheckpoint, conds: np.ndarray, batch_size: int = 256, sources: Sequence[TokenSequence] | None = None
) -> list[GenerationResult]:
    model = checkpoint.model
    dtype = next(model.parameters()).dtype
    conds_t = _as_cond(conds, dtype)
    if conds_t.dim() != 2:
        raise DimensionError("generate_batch expects a (n, d) matrix")
    model._check_cond(conds_t)
    results = []
    for start in range(0, conds_t.shape[0], batch_size):
        for j, (ids, term) in enumerate(greedy_ids(model, conds_t[start : start + batch_size])):
            src = sources[start + j] if sources is not None else None
            results.append(_to_result(checkpoint.vocab, ids, term, src))
    return results


def gradient_check(
    model: ConditionalLM,
    ids: torch.Tensor,
    cond: torch.Tensor,
    n_samples: int = 200,
    eps: float = 1e-6,
    seed: int = 0,
) -> np.ndarray:
    """Relative errors between autograd and central finite differences.

    Run on a float64 model. Parameters are sampled uniformly over all
    scalar entries; entries where both gradients are below 1e-9 count
    as exact matches.
    """
    params = [p for p in model.parameters() if p.requires_grad]
    model.zero_grad()
    model.loss(ids, cond).backward()
    analytic = [p.grad.detach().clone() for p in params]
    sizes = np.array([p.numel() for p in params])
    rng = np.random.default_rng(seed)
    flat = rng.choice(sizes.sum(), size=min(n_samples, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    errors = []
    with torch.no_grad():
        for f in flat:
            k = int(np.searchsorted(offsets, f, side="right") - 1)
            p, j = params[k].view(-1), int(f - offsets[k])
            orig = p[j].item()
            p[j] = orig + eps
            up = model.loss(ids, cond).item()
            p[j] = orig - eps
            down = model.loss(ids, cond).item()
            p[j] = orig
            numeric = (up - down) / (2 * eps)
            a = analytic[k].view(-1)[j].item()
            scale = max(abs(a), abs(numeric))
            errors.append(0.0 if scale < 1e-9 else abs(a - numeric) / scale)
    return np.array(errors)


__all__ = [
    "DecoderConfig",
    "ConditionalLM",
    "MixtureOfSoftmaxes",
    "SoftmaxHead",
    "DecoderCheckpoint",
    "GenerationResult",
    "TrainHyper",
    "init_decoder",
    "step",
    "train",
    "generate",
    "generate_batch",
    "gradient_check",
]
