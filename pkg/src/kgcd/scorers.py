"""Mock next-token-logit providers used for testing and the CLI.

Three backends:
  * TableScorer    - context-suffix rules over decoded text, uniform default.
  * ScriptedScorer - replays a fixed continuation, then ends the sequence.
  * RandomLogitScorer - seeded pseudo-random logits, deterministic per context.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .tokens import EOS_TOKEN, TokenizationError, Vocabulary, canonical_text


class LmScorer(Protocol):
    """Next-token logits for a token-id context; deterministic per context."""

    def next_logits(self, context: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class TableRule:
    suffix: str  # matches when the decoded context ends with this text
    logits: dict[int, float]
    default: float | None = None


class TableScorer:
    """Uniform default logits plus overrides from the first matching rule."""

    def __init__(self, vocab: Vocabulary, rules: Sequence[TableRule] = (), default: float = 0.0):
        self.vocab = vocab
        self.rules = list(rules)
        self.default = float(default)

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        text = self.vocab.decode(context)
        for rule in self.rules:
            if text.endswith(rule.suffix):
                base = self.default if rule.default is None else rule.default
                logits = np.full(self.vocab.size, base, dtype=np.float64)
                for token_id, value in rule.logits.items():
                    logits[token_id] = value
                return logits
        return np.full(self.vocab.size, self.default, dtype=np.float64)

    @classmethod
    def from_dict(cls, vocab: Vocabulary, obj: dict) -> "TableScorer":
        rules = [
            TableRule(
                suffix=r.get("suffix", ""),
                logits={vocab.id_of(tok): float(v) for tok, v in r.get("logits", {}).items()},
                default=r.get("default"),
            )
            for r in obj.get("rules", [])
        ]
        return cls(vocab, rules, default=float(obj.get("default", 0.0)))


class ScriptedScorer:
    """Puts a high logit on the next scripted token, low mass everywhere else.

    Position is derived from the context length relative to base_len (the
    prompt length), so the scorer stays a pure function of the context. Once
    the script is exhausted it favors the end-of-sequence token.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        script: Sequence[int],
        base_len: int,
        high: float = 10.0,
        low: float = 0.0,
    ):
        self.vocab = vocab
        self.script = list(script)
        self.base_len = base_len
        self.high = high
        self.low = low

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        logits = np.full(self.vocab.size, self.low, dtype=np.float64)
        pos = len(context) - self.base_len
        target = self.script[pos] if 0 <= pos < len(self.script) else self.vocab.eos_id
        logits[target] = self.high
        return logits


class RandomLogitScorer:
    """Seeded random normal logits; identical context -> identical logits."""

    def __init__(self, size: int, seed: int = 0, bias: dict[int, float] | None = None):
        self.size = size
        self.seed = seed
        self.bias = np.zeros(size, dtype=np.float64)
        for token_id, value in (bias or {}).items():
            self.bias[token_id] = value

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        digest = zlib.crc32(np.asarray(context, dtype=np.int64).tobytes(), self.seed & 0xFFFFFFFF)
        rng = np.random.default_rng(digest)
        return rng.standard_normal(self.size) + self.bias


def path_biased_rules(
    vocab: Vocabulary, prompt_text: str, continuation: Sequence[int], high: float = 10.0
) -> list[TableRule]:
    """Rules that steer greedy/beam decoding along a fixed continuation.

    Each rule keys on the full decoded context at one position, so it fires
    exactly there and nowhere else; off-path beam branches fall back to the
    uniform default.
    """
    base = canonical_text(prompt_text)
    rules: list[TableRule] = []
    for i, token_id in enumerate(continuation):
        text = base if i == 0 else base + " " + vocab.decode(continuation[:i])
        rules.append(TableRule(suffix=text, logits={token_id: high}))
    return rules


@dataclass(frozen=True)
class ScorerSpec:
    """Parsed --scorer argument: kind plus its payload."""

    kind: str  # "table" | "scripted" | "random"
    payload: dict

    def vocabulary_tokens(self) -> list[str]:
        """Token strings the vocabulary must contain for this scorer."""
        if self.kind == "table":
            return [tok for r in self.payload.get("rules", []) for tok in r.get("logits", {})]
        if self.kind == "scripted":
            return list(self.payload.get("tokens", []))
        return []

    def build(self, vocab: Vocabulary, base_len: int, seed: int = 0) -> LmScorer:
        if self.kind == "table":
            return TableScorer.from_dict(vocab, self.payload)
        if self.kind == "scripted":
            script = [vocab.id_of(tok) for tok in self.payload.get("tokens", [])]
            return ScriptedScorer(vocab, script, base_len)
        if self.kind == "random":
            return RandomLogitScorer(vocab.size, seed=seed)
        raise ValueError(f"unknown scorer kind: {self.kind!r}")


def parse_scorer_spec(spec: str) -> ScorerSpec:
    """Parse "table:PATH", "scripted:PATH" or "random" into a ScorerSpec."""
    if spec == "random":
        return ScorerSpec("random", {})
    kind, sep, path = spec.partition(":")
    if not sep or kind not in ("table", "scripted"):
        raise ValueError(
            f"scorer spec must be 'table:PATH', 'scripted:PATH' or 'random', got {spec!r}"
        )
    with open(Path(path), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return ScorerSpec(kind, payload)
