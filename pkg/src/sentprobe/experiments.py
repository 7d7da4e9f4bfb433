"""Desk-scale experiments on the synthetic grammar: reconstruction and cross-architecture stability."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import synthetic
from .analysis import cross_variant_spearman
from .corpus import TokenSequence, Vocabulary, build_vocabulary, tokenize
from .decoder import DecoderCheckpoint, DecoderConfig, TrainHyper, init_decoder, train
from .diagnostics import DiagnosticReport, diagnose
from .encoders import Encoder, TokenEmbeddingTable, native_spec

log = logging.getLogger(__name__)

# decoder variants compared by the stability harness
VARIANTS = {
    "concat+mos": {"conditioning": "concat", "head": "mos"},
    "init_state+softmax": {"conditioning": "init_state", "head": "softmax"},
}
STABILITY_DIAGNOSTICS = ("BLEU", "PERM", "Id", "Id/PERM")


@dataclass
class DeskConfig:
    n_sentences: int = 1000
    token_dim: int = 32
    word_dim: int = 32
    hidden_dim: int = 64
    num_layers: int = 1
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 3e-3
    mos_components: int = 3
    eval_subset: int = 200
    ambiguous: bool = False
    seed: int = 0


@dataclass
class DeskData:
    vocab: Vocabulary
    train: list[TokenSequence]
    table: TokenEmbeddingTable
    heldout: list[TokenSequence] = field(default_factory=list)


def desk_data(cfg: DeskConfig, n_heldout: int = 0) -> DeskData:
    sents = synthetic.generate_corpus(cfg.n_sentences + n_heldout, seed=cfg.seed, ambiguous=cfg.ambiguous)
    seqs = [TokenSequence(tokenize(s).tokens, line_index=i) for i, s in enumerate(sents)]
    vocab = build_vocabulary(seqs[: cfg.n_sentences])
    seqs = [vocab.encode(s) for s in seqs]
    table = TokenEmbeddingTable.random(vocab, cfg.token_dim, seed=cfg.seed)
    return DeskData(vocab, seqs[: cfg.n_sentences], table, seqs[cfg.n_sentences :])


def train_desk_decoder(
    cfg: DeskConfig, data: DeskData, encoder: Encoder, conditioning: str = "concat", head: str = "softmax"
) -> DecoderCheckpoint:
    dcfg = DecoderConfig(
        vocab_size=len(data.vocab),
        cond_dim=encoder.dim,
        word_dim=cfg.word_dim,
        hidden_dim=cfg.hidden_dim,
        num_layers=cfg.num_layers,
        conditioning=conditioning,
        head=head,
        mos_components=cfg.mos_components,
    )
    model = init_decoder(dcfg, seed=cfg.seed)
    hyper = TrainHyper(epochs=cfg.epochs, batch_size=cfg.batch_size, learning_rate=cfg.learning_rate, seed=cfg.seed)
    return train(model, encoder, data.train, data.vocab, hyper)


def reconstruction_experiment(cfg: DeskConfig | None = None) -> dict:
    """Train a concat/softmax decoder over mean-pooled embeddings and score it on training sentences."""
    cfg = cfg or DeskConfig()
    data = desk_data(cfg)
    encoder = Encoder(native_spec("avg", cfg.token_dim), data.table)
    ckpt = train_desk_decoder(cfg, data, encoder)
    report, pairs = diagnose(ckpt, encoder, data.train[: cfg.eval_subset])
    return {"config": cfg, "data": data, "encoder": encoder, "checkpoint": ckpt, "report": report, "pairs": pairs}


def stability_experiment(
    cfg: DeskConfig | None = None,
    kinds: tuple[str, ...] = ("avg", "max", "hier", "concat"),
    n_heldout: int = 300,
    train_fraction: float | None = None,
) -> dict:
    """Diagnostics per (decoder variant, encoder) on held-out sentences, and their cross-variant Spearman.

    With ``train_fraction`` set, a third setting trains the first variant on
    that fraction of the corpus (the low-resource comparison).
    """
    cfg = cfg or DeskConfig(epochs=30, ambiguous=True)
    data = desk_data(cfg, n_heldout=n_heldout)
    settings = dict(VARIANTS)
    reports: dict[str, dict[str, DiagnosticReport]] = {name: {} for name in settings}
    for kind in kinds:
        encoder = Encoder(native_spec(kind, cfg.token_dim), data.table)
        for name, variant in settings.items():
            ckpt = train_desk_decoder(cfg, data, encoder, **variant)
            reports[name][encoder.encoder_id], _ = diagnose(ckpt, encoder, data.heldout)
            log.info("%s %s %s", name, encoder.encoder_id, reports[name][encoder.encoder_id].to_dict())
        if train_fraction is not None:
            n = max(1, int(len(data.train) * train_fraction))
            small = DeskData(data.vocab, data.train[:n], data.table, data.heldout)
            ckpt = train_desk_decoder(cfg, small, encoder, **VARIANTS["concat+mos"])
            reports.setdefault("low-resource", {})[encoder.encoder_id], _ = diagnose(ckpt, encoder, data.heldout)

    def table(name):
        return {enc: {d: rep.metric(d) for d in STABILITY_DIAGNOSTICS} for enc, rep in reports[name].items()}

    base = "concat+mos"
    rho = {other: cross_variant_spearman(table(base), table(other)) for other in reports if other != base}
    return {"reports": reports, "rho": rho}
