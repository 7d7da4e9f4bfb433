"""Corpus ingestion, tokenization and vocabularies."""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConfigurationError, CorpusEncodingError, DomainError

PAD, SOS, EOS, UNK = "<pad>", "<sos>", "<eos>", "<unk>"
SPECIALS = (PAD, SOS, EOS, UNK)
PAD_ID, SOS_ID, EOS_ID, UNK_ID = range(4)

# clitics ('m, 't, 's) stay attached to their apostrophe; other punctuation is split off
_TOKEN_RE = re.compile(r"'\w+|\w+|[^\w\s]")

Tokenizer = Callable[[str], list]


@dataclass(frozen=True)
class RawSentence:
    text: str
    line_index: int


@dataclass(frozen=True)
class TokenSequence:
    """Tokens of one sentence; ``ids`` stays ``None`` until a vocabulary is applied."""

    tokens: tuple[str, ...]
    ids: tuple[int, ...] | None = None
    line_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
            if len(self.ids) != len(self.tokens):
                raise DomainError("tokens and ids differ in length")
        for tok in self.tokens:
            if tok in (PAD, SOS, EOS):
                raise DomainError(f"special token {tok!r} inside a token sequence")

    def __len__(self):
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def default_tokenizer(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def tokenize(text: str, lowercase: bool = True, tokenizer: Tokenizer | None = None) -> TokenSequence:
    """Split ``text`` into tokens.

    The default detaches punctuation and splits on whitespace. A subword
    tokenizer can be passed instead; whichever is used must also be used for
    training targets and diagnostics.
    """
    if lowercase:
        text = text.lower()
    split = tokenizer or default_tokenizer
    return TokenSequence(tuple(split(text)))


def load_sentences(
    path: str | Path,
    max_len: int = 15,
    lowercase: bool = True,
    tokenizer: Tokenizer | None = None,
) -> list[RawSentence]:
    """Read a one-sentence-per-line file, keeping lines of at most ``max_len`` tokens.

    ``line_index`` is the 0-based line number in the original file, so it can
    key into a line-aligned embedding file after filtering. Blank lines are
    dropped.
    """
    if max_len < 1:
        raise ConfigurationError("max_len must be positive")
    path = Path(path)
    raw = path.read_bytes()
    if not raw:
        return []
    lines = raw.split(b"\n")
    if lines[-1] == b"":
        lines.pop()
    out = []
    for i, line in enumerate(lines):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusEncodingError(path, i, exc.reason) from None
        text = text.rstrip("\r")
        n = len(tokenize(text, lowercase, tokenizer))
        if 0 < n <= max_len:
            out.append(RawSentence(text, i))
    return out


def tokenize_corpus(
    sentences: Iterable[RawSentence], lowercase: bool = True, tokenizer: Tokenizer | None = None
) -> list[TokenSequence]:
    out = []
    for s in sentences:
        seq = tokenize(s.text, lowercase, tokenizer)
        out.append(TokenSequence(seq.tokens, line_index=s.line_index))
    return out


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != SPECIALS:
            raise ConfigurationError(f"vocabulary must start with {SPECIALS}")
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ConfigurationError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def encode(self, seq: TokenSequence) -> TokenSequence:
        """Attach ids; OOV tokens get UNK but keep their surface form."""
        ids = tuple(self.token_to_id.get(t, UNK_ID) for t in seq.tokens)
        return TokenSequence(seq.tokens, ids, seq.line_index)

    def decode(self, ids: Sequence[int]) -> TokenSequence:
        ids = [int(i) for i in ids if i not in (PAD_ID, SOS_ID, EOS_ID)]
        return TokenSequence(tuple(self.id_to_token[i] for i in ids), tuple(ids))

    def digest(self) -> str:
        h = hashlib.sha256()
        for tok in self.id_to_token:
            h.update(tok.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.id_to_token), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))


def build_vocabulary(corpus: Sequence[TokenSequence], min_freq: int = 1, max_size: int = 50000) -> Vocabulary:
    """Most frequent tokens first, ties broken lexicographically.

    ``max_size`` counts the four specials.
    """
    if max_size < 5:
        raise ConfigurationError("max_size must be at least 5 (4 specials + 1 token)")
    if min_freq < 1:
        raise ConfigurationError("min_freq must be positive")
    if not corpus:
        raise DomainError("cannot build a vocabulary from an empty corpus")
    counts = Counter(t for seq in corpus for t in seq.tokens if t not in SPECIALS)
    ranked = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocabulary(list(SPECIALS) + ranked[: max_size - len(SPECIALS)])
