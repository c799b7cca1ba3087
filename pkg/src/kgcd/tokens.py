"""Tokenizer abstraction: whitespace-symbol vocabulary and triplet (de)serialization.

The engine only ever sees token ids. The whitespace tokenizer defined here is
the reference adapter: one id per whitespace-delimited symbol, with the first
three ids reserved for the triplet-open marker "<", the triplet-close marker
">" and the sequence terminator "<eos>".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .kg import FIELD_DELIMITER, Triplet

T_BOS_TOKEN = "<"
T_EOS_TOKEN = ">"
EOS_TOKEN = "<eos>"
RESERVED_TOKENS = (T_BOS_TOKEN, T_EOS_TOKEN, EOS_TOKEN)

TokenSeq = list[int]


class TokenizationError(ValueError):
    """Text cannot be encoded losslessly by this vocabulary."""


class SerializationError(ValueError):
    """A triplet cannot be serialized into a marker-anchored token sequence."""


def canonical_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces (the encodable form)."""
    return " ".join(text.split())


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    t_bos_id: int = 0
    t_eos_id: int = 1
    eos_id: int = 2
    _id_of: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        ids = (self.t_bos_id, self.t_eos_id, self.eos_id)
        if len(set(ids)) != 3 or any(not (0 <= i < len(self.tokens)) for i in ids):
            raise ValueError("special ids must be three distinct valid token ids")
        id_of: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in id_of:
                raise ValueError(f"duplicate token string: {tok!r}")
            id_of[tok] = i
        object.__setattr__(self, "_id_of", id_of)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._id_of[token]
        except KeyError:
            raise TokenizationError(f"unknown token: {token!r}") from None

    def string_of(self, token_id: int) -> str:
        if not 0 <= token_id < self.size:
            raise ValueError(f"token id out of range: {token_id}")
        return self.tokens[token_id]

    def encode(self, text: str) -> TokenSeq:
        """Map canonically-spaced text to ids; decode(encode(text)) == text."""
        if text == "":
            return []
        symbols = text.split()
        if " ".join(symbols) != text:
            raise TokenizationError(
                "text is not canonically spaced; pass it through canonical_text() first"
            )
        return [self.id_of(s) for s in symbols]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.string_of(i) for i in ids)


def build_vocabulary(texts: Iterable[str]) -> Vocabulary:
    """Whitespace-symbol vocabulary over the given texts, specials first."""
    tokens: list[str] = list(RESERVED_TOKENS)
    seen = set(tokens)
    for text in texts:
        for sym in text.split():
            if sym not in seen:
                seen.add(sym)
                tokens.append(sym)
    return Vocabulary(tuple(tokens))


def load_vocabulary(path: str | Path) -> Vocabulary:
    """One token per line; line number = id; first three lines are reserved."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = tuple(line.rstrip("\n") for line in fh)
    if tokens[:3] != RESERVED_TOKENS:
        raise ValueError(f"first three vocabulary lines must be {RESERVED_TOKENS}")
    return Vocabulary(tokens)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")


def triplet_surface(t: Triplet) -> str:
    """The marker-wrapped surface form a triplet is generated as."""
    return f"{T_BOS_TOKEN} {t.as_text()} {T_EOS_TOKEN}"


def serialize_triplet(vocab: Vocabulary, t: Triplet) -> TokenSeq:
    """Encode "< head -> relation -> tail >"; anchored by the two markers.

    The open marker id must appear exactly once (position 0) and the close
    marker exactly once (last position); fields whose encodings contain either
    marker are rejected, since they would break trie anchoring and the
    constrained/unconstrained phase switch.
    """
    ids = vocab.encode(triplet_surface(t))
    if vocab.t_bos_id in ids[1:]:
        raise SerializationError(
            f"field encoding contains the triplet-open marker: {t.as_text()!r}"
        )
    if vocab.t_eos_id in ids[:-1]:
        raise SerializationError(
            f"field encoding contains the triplet-close marker: {t.as_text()!r}"
        )
    return ids


def parse_triplet(vocab: Vocabulary, seq: Sequence[int]) -> Triplet:
    """Inverse of serialize_triplet."""
    if len(seq) < 2 or seq[0] != vocab.t_bos_id or seq[-1] != vocab.t_eos_id:
        raise SerializationError("sequence is not marker-anchored")
    interior = vocab.decode(seq[1:-1])
    parts = interior.split(FIELD_DELIMITER)
    if len(parts) != 3:
        raise SerializationError(
            f"interior splits into {len(parts)} parts, expected 3: {interior!r}"
        )
    return Triplet(*parts)
