"""Command-line entry point: ``sentprobe <subcommand> ...``."""

from __future__ import annotations

import argparse
import importlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch

from . import algebra, analysis, diagnostics
from .corpus import build_vocabulary, load_sentences, tokenize, tokenize_corpus, TokenSequence, Vocabulary
from .decoder import DecoderCheckpoint, DecoderConfig, TrainHyper, generate_batch, init_decoder, train
from .encoders import Encoder, EncoderSpec, TokenEmbeddingTable, native_spec, read_embedding_file, write_embedding_file
from .errors import ProbeError

log = logging.getLogger("sentprobe")


@dataclass
class RunConfig:
    corpus: str | None = None
    vocab: str | None = None
    embeddings: str | None = None
    token_embeddings: str | None = None
    checkpoint: str | None = None
    out: str | None = None
    encoder: str = "avg"
    encoder_id: str | None = None
    encoder_dim: int | None = None
    random_token_dim: int | None = None
    hier_n: int = 3
    max_len: int = 15
    lowercase: bool = True
    min_freq: int = 1
    max_size: int = 50000
    word_dim: int = 256
    hidden_dim: int = 1024
    num_layers: int = 3
    conditioning: str = "concat"
    head: str = "mos"
    mos_components: int = 5
    max_gen_len: int = 20
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    seed: int = 0

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        """Defaults, then the ``--config`` file, then explicit flags."""
        values = {}
        if getattr(args, "config", None):
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ProbeError(f"unknown config fields: {sorted(unknown)}")
        for name in known:
            flag = getattr(args, name, None)
            if flag is not None:
                values[name] = flag
        return cls(**values)

    def write(self, out_dir: Path) -> None:
        (out_dir / "config.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ProbeError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _out_dir(cfg: RunConfig) -> Path:
    _require(cfg, "out")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out)
    return out


def _load_corpus(cfg: RunConfig, vocab: Vocabulary | None = None) -> list[TokenSequence]:
    _require(cfg, "corpus")
    seqs = tokenize_corpus(load_sentences(cfg.corpus, cfg.max_len, cfg.lowercase), cfg.lowercase)
    return [vocab.encode(s) for s in seqs] if vocab else seqs


def _build_encoder(cfg: RunConfig, vocab: Vocabulary | None) -> Encoder:
    if cfg.encoder == "precomputed":
        _require(cfg, "embeddings")
        dim = cfg.encoder_dim or read_embedding_file(cfg.embeddings).shape[1]
        return Encoder(EncoderSpec(cfg.encoder_id or "precomputed", "precomputed", dim, {"path": cfg.embeddings}))
    if cfg.token_embeddings:
        table = TokenEmbeddingTable.load(cfg.token_embeddings)
    elif cfg.random_token_dim:
        if vocab is None:
            raise ProbeError("--random-token-dim needs --vocab")
        table = TokenEmbeddingTable.random(vocab, cfg.random_token_dim, seed=cfg.seed)
    else:
        raise ProbeError(f"encoder {cfg.encoder!r} needs --token-embeddings or --random-token-dim")
    return Encoder(native_spec(cfg.encoder, table.dim, cfg.encoder_id, cfg.hier_n), table)


def _load_vocab(cfg: RunConfig) -> Vocabulary:
    _require(cfg, "vocab")
    return Vocabulary.load(cfg.vocab)


def _load_checkpoint(cfg: RunConfig, vocab: Vocabulary) -> DecoderCheckpoint:
    _require(cfg, "checkpoint")
    return DecoderCheckpoint.load(cfg.checkpoint, vocab)


def _text_encoder(cfg: RunConfig, encoder: Encoder, vocab: Vocabulary):
    def encode(text: str):
        return encoder.encode(vocab.encode(tokenize(text, cfg.lowercase)))

    return encode


def _load_scorer(spec: str | None):
    if not spec:
        return None
    module, _, attr = spec.partition(":")
    return getattr(importlib.import_module(module), attr)


def cmd_build_vocab(cfg, args):
    out = _out_dir(cfg)
    vocab = build_vocabulary(_load_corpus(cfg), cfg.min_freq, cfg.max_size)
    vocab.save(out / "vocab.txt")
    print(f"{len(vocab)} entries -> {out / 'vocab.txt'}")


def cmd_encode(cfg, args):
    out = _out_dir(cfg)
    vocab = _load_vocab(cfg)
    encoder = _build_encoder(cfg, vocab)
    mat = encoder.encode_many(_load_corpus(cfg, vocab))
    name = "embeddings.bin" if args.binary else "embeddings.txt"
    write_embedding_file(out / name, mat, binary=args.binary)
    print(f"{mat.shape[0]} x {mat.shape[1]} -> {out / name}")


def cmd_train(cfg, args):
    out = _out_dir(cfg)
    torch.manual_seed(cfg.seed)
    vocab = _load_vocab(cfg)
    encoder = _build_encoder(cfg, vocab)
    corpus = _load_corpus(cfg, vocab)
    dcfg = DecoderConfig(
        vocab_size=len(vocab),
        cond_dim=encoder.dim,
        word_dim=cfg.word_dim,
        hidden_dim=cfg.hidden_dim,
        num_layers=cfg.num_layers,
        conditioning=cfg.conditioning,
        head=cfg.head,
        mos_components=cfg.mos_components,
        max_gen_len=cfg.max_gen_len,
    )
    model = init_decoder(dcfg, cfg.seed)
    hyper = TrainHyper(cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.clip_norm, cfg.seed)
    ckpt = train(model, encoder, corpus, vocab, hyper, log_path=out / "train_log.jsonl")
    ckpt.save(out / "decoder.ckpt")
    cfg.checkpoint = str(out / "decoder.ckpt")
    cfg.write(out)
    print(f"final loss {ckpt.training_meta['final_loss']:.4f} -> {out / 'decoder.ckpt'}")


def cmd_generate(cfg, args):
    out = _out_dir(cfg)
    vocab = _load_vocab(cfg)
    ckpt = _load_checkpoint(cfg, vocab)
    if cfg.corpus:
        encoder = _build_encoder(cfg, vocab)
        sources = _load_corpus(cfg, vocab)
        conds = encoder.encode_many(sources)
    else:
        _require(cfg, "embeddings")
        conds, sources = read_embedding_file(cfg.embeddings), None
    results = generate_batch(ckpt, conds, sources=sources)
    with open(out / "pairs.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            rec = {"input": res.input.text if res.input else None, "output": res.output.text}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            print(res.output.text)


def cmd_diagnose(cfg, args):
    out = _out_dir(cfg)
    vocab = _load_vocab(cfg)
    ckpt = _load_checkpoint(cfg, vocab)
    encoder = _build_encoder(cfg, vocab)
    corpus = _load_corpus(cfg, vocab)
    if args.limit:
        corpus = corpus[: args.limit]
    report, pairs = diagnostics.diagnose(ckpt, encoder, corpus, _load_scorer(args.mover), vocab=vocab)
    diagnostics.write_pairs(out / "pairs.jsonl", pairs)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    (out / "report.json").write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_score_pairs(cfg, args):
    out = _out_dir(cfg)
    pairs = diagnostics.read_pairs(args.pairs, cfg.lowercase)
    report = diagnostics.report_from_pairs(cfg.encoder_id or "pairs", pairs, _load_scorer(args.mover))
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    (out / "report.json").write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_correlate(cfg, args):
    out = _out_dir(cfg)
    diag = analysis.ScoreTable.from_csv(args.diagnostics) if args.diagnostics else analysis.load_fixture("reference_metrics")
    down = analysis.ScoreTable.from_csv(args.downstream) if args.downstream else analysis.load_fixture("reference_downstream")
    matrix = analysis.correlation_matrix(diag, down)
    matrix.write(out / "corr.csv", out / "summary.json")
    print("encoders: " + ", ".join(matrix.encoders))
    for d, s in matrix.summary().items():
        fmt = lambda v: "null" if v is None else f"{v:.2f}"  # noqa: E731
        print(f"{d:10s} mean {fmt(s['mean_rho'])}  min {fmt(s['min_rho'])}")


def cmd_rank(cfg, args):
    out = _out_dir(cfg)
    table = analysis.ScoreTable.from_csv(args.table) if args.table else analysis.load_fixture("reference_metrics")
    if args.by:
        ranking = analysis.rank_encoders(table, args.by)
    else:
        ranking = analysis.average_rank(table)
    with open(out / "ranks.csv", "w", encoding="utf-8") as fh:
        fh.write("encoder,rank\n")
        for enc, r in ranking.items():
            fh.write(f"{enc},{r:g}\n")
            print(f"{r:g}\t{enc}")


def cmd_check_metrics(cfg, args):
    table = analysis.ScoreTable.from_csv(args.table) if args.table else analysis.load_fixture("reference_metrics")
    for row in analysis.id_perm_consistency(table, args.tol):
        flag = "ok" if row["consistent"] else "FLAGGED"
        print(f"{row['encoder']:14s} stated {row['stated']:6.2f} recomputed {row['recomputed']:6.2f} {flag}")


def _setup_algebra(cfg):
    vocab = _load_vocab(cfg)
    ckpt = _load_checkpoint(cfg, vocab)
    encoder = _build_encoder(cfg, vocab)
    return ckpt, _text_encoder(cfg, encoder, vocab)


def cmd_analogy(cfg, args):
    out = _out_dir(cfg)
    ckpt, encode = _setup_algebra(cfg)
    results = algebra.solve_analogies(ckpt, encode, algebra.read_analogy_queries(args.queries))
    with open(out / "analogies.jsonl", "w", encoding="utf-8") as fh:
        for rec in results:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            print(f"{rec['a']} : {rec['b']} :: {rec['z_text']} : {rec['c']}")


def cmd_interpolate(cfg, args):
    out = _out_dir(cfg)
    ckpt, encode = _setup_algebra(cfg)
    alphas = np.linspace(0.0, 1.0, args.steps)
    rows = algebra.sweep(ckpt, encode(args.x), encode(args.y), alphas)
    with open(out / "interpolations.jsonl", "w", encoding="utf-8") as fh:
        for rec in rows:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            print(f"{rec['alpha']:.3f}\t{rec['text']}")


REPL_HELP = """commands:
  <sentence>             reconstruct a sentence from its embedding
  :analogy a | b | c     decode enc(a) - enc(b) + enc(c)
  :interp x | y [| n]    decode n points between enc(y) (alpha=0) and enc(x) (alpha=1)
  :help                  this text
  :quit                  leave"""


def repl(ckpt, encode, stdin=sys.stdin, stdout=sys.stdout) -> None:
    def say(text):
        print(text, file=stdout, flush=True)

    say(REPL_HELP)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            if line in (":quit", ":q", ":exit"):
                break
            if line == ":help":
                say(REPL_HELP)
            elif line.startswith(":analogy"):
                parts = [p.strip() for p in line[len(":analogy"):].split("|")]
                if len(parts) != 3:
                    say("usage: :analogy a | b | c")
                    continue
                u = algebra.analogy(*(encode(p) for p in parts))
                say(algebra.decode_vector(ckpt, u).output.text)
            elif line.startswith(":interp"):
                parts = [p.strip() for p in line[len(":interp"):].split("|")]
                if len(parts) not in (2, 3):
                    say("usage: :interp x | y [| n]")
                    continue
                steps = int(parts[2]) if len(parts) == 3 else 5
                for rec in algebra.sweep(ckpt, encode(parts[0]), encode(parts[1]), np.linspace(0, 1, steps)):
                    say(f"{rec['alpha']:.3f}\t{rec['text']}")
            elif line.startswith(":"):
                say(f"unknown command {line.split()[0]}; try :help")
            else:
                say(algebra.decode_vector(ckpt, encode(line)).output.text)
        except (ProbeError, ValueError) as exc:
            say(f"error: {exc}")


def cmd_repl(cfg, args):
    ckpt, encode = _setup_algebra(cfg)
    repl(ckpt, encode)


def _add_common(p: argparse.ArgumentParser, *groups: str) -> None:
    p.add_argument("--config", help="JSON run config; flags override its fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--no-lowercase", action="store_const", const=False, dest="lowercase")
    if "corpus" in groups:
        p.add_argument("--corpus", help="one sentence per line, UTF-8")
    if "vocab" in groups:
        p.add_argument("--vocab", help="vocabulary file (one token per line)")
    if "encoder" in groups:
        p.add_argument("--encoder", choices=["avg", "max", "hier", "concat", "precomputed"])
        p.add_argument("--encoder-id", dest="encoder_id")
        p.add_argument("--encoder-dim", type=int, dest="encoder_dim")
        p.add_argument("--embeddings", help="precomputed sentence embeddings (text or binary)")
        p.add_argument("--token-embeddings", dest="token_embeddings", help="word2vec-style text file")
        p.add_argument("--random-token-dim", type=int, dest="random_token_dim", help="use seeded random token vectors")
        p.add_argument("--hier-n", type=int, dest="hier_n")
    if "checkpoint" in groups:
        p.add_argument("--checkpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentprobe", description="Decode sentence embeddings and score the reconstructions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build a vocabulary from a corpus")
    _add_common(p, "corpus")
    p.add_argument("--min-freq", type=int, dest="min_freq")
    p.add_argument("--max-size", type=int, dest="max_size")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("encode", help="corpus -> sentence embedding file")
    _add_common(p, "corpus", "vocab", "encoder")
    p.add_argument("--binary", action="store_true", help="write the binary format")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train a decoder on a corpus")
    _add_common(p, "corpus", "vocab", "encoder")
    for name, typ in [("word_dim", int), ("hidden_dim", int), ("num_layers", int), ("mos_components", int),
                      ("max_gen_len", int), ("epochs", int), ("batch_size", int), ("learning_rate", float),
                      ("clip_norm", float)]:
        p.add_argument("--" + name.replace("_", "-"), type=typ, dest=name)
    p.add_argument("--conditioning", choices=["concat", "init_state"])
    p.add_argument("--head", choices=["softmax", "mos"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode an embedding file or a corpus")
    _add_common(p, "corpus", "vocab", "encoder", "checkpoint")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("diagnose", help="reconstruct a corpus and write report.json")
    _add_common(p, "corpus", "vocab", "encoder", "checkpoint")
    p.add_argument("--limit", type=int, help="only the first N sentences")
    p.add_argument("--mover", help="pairwise scorer as module:function, called with (input, output) text")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("score-pairs", help="score an existing pairs.jsonl file")
    _add_common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--encoder-id", dest="encoder_id")
    p.add_argument("--mover")
    p.set_defaults(func=cmd_score_pairs)

    p = sub.add_parser("correlate", help="Spearman between diagnostic and downstream tables")
    _add_common(p)
    p.add_argument("--diagnostics", help="diagnostic ScoreTable CSV (default: bundled reference metrics)")
    p.add_argument("--downstream", help="downstream ScoreTable CSV (default: bundled reference downstream)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("rank", help="rank encoders by one row or by average rank")
    _add_common(p)
    p.add_argument("--table", help="ScoreTable CSV (default: bundled reference metrics)")
    p.add_argument("--by", help="row to rank by; omitted = average rank over all rows")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("check-metrics", help="compare a metrics table's Id/PERM row with Id / PERM")
    p.add_argument("--table")
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=cmd_check_metrics)

    p = sub.add_parser("analogy", help="batch analogies from JSON-lines {a, b, c}")
    _add_common(p, "vocab", "encoder", "checkpoint")
    p.add_argument("--queries", required=True)
    p.set_defaults(func=cmd_analogy)

    p = sub.add_parser("interpolate", help="decode points between two sentences")
    _add_common(p, "vocab", "encoder", "checkpoint")
    p.add_argument("--x", required=True, help="sentence at alpha=1")
    p.add_argument("--y", required=True, help="sentence at alpha=0")
    p.add_argument("--steps", type=int, default=5)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("repl", help="interactive reconstruction, analogies and interpolation")
    _add_common(p, "vocab", "encoder", "checkpoint")
    p.set_defaults(func=cmd_repl)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.resolve(args)
        args.func(cfg, args)
    except (ProbeError, OSError, ValueError, KeyError) as exc:
        print(f"sentprobe {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
