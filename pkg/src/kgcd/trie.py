"""Constraint trie over serialized triplet token sequences, plus logit masking.

The trie is a plain nested dict (token id -> child dict). Every suffix of
every serialized triplet is inserted, so a root walk along any contiguous
substring of a serialized triplet lands on a node whose child keys are the
valid continuations. The decoder only issues lookups anchored at the
triplet-open marker, where this coincides with exact-prefix semantics.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.special import log_softmax

from .kg import Triplet
from .tokens import Vocabulary, serialize_triplet

TrieNode = dict[int, dict]

ValidSet = set[int]


class MaskError(ValueError):
    """Logit masking cannot proceed (e.g. empty valid set)."""


def insert_sequence(trie: TrieNode, seq: Sequence[int]) -> None:
    """Insert all suffixes of seq into the trie."""
    for start in range(len(seq)):
        node = trie
        for token in seq[start:]:
            node = node.setdefault(token, {})


def build_trie(triplets: Iterable[Triplet], vocab: Vocabulary) -> TrieNode:
    trie: TrieNode = {}
    for t in triplets:
        insert_sequence(trie, serialize_triplet(vocab, t))
    return trie


def find_valid_tokens(trie: TrieNode, prefix: Sequence[int]) -> ValidSet:
    """Child-key set of the node reached by walking prefix; empty if off-trie."""
    node = trie
    for token in prefix:
        node = node.get(token, {})
    return set(node.keys())


def mask_logits(logits: np.ndarray | Sequence[float], valid: ValidSet) -> np.ndarray:
    """Keep logits of valid ids unchanged, set everything else to -inf.

    The input is not mutated; after softmax, masked ids carry exactly zero
    probability mass.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if not valid:
        raise MaskError("empty valid set: constrained decoding hit a dead end")
    if not np.all(np.isfinite(arr)):
        raise MaskError("logits must be finite")
    idx = np.fromiter(valid, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= arr.shape[0]:
        raise MaskError("valid set contains out-of-range token ids")
    out = np.full_like(arr, -np.inf)
    out[idx] = arr[idx]
    return out


def masked_log_probs(logits: np.ndarray | Sequence[float], valid: ValidSet) -> np.ndarray:
    """Log-softmax of the masked logits (masked ids stay at -inf)."""
    return log_softmax(mask_logits(logits, valid))


def trie_debug_dump(trie: TrieNode, indent: int = 0) -> str:
    """Stable nested-map rendering (ascending token id) for golden tests."""
    lines: list[str] = []

    def render(node: TrieNode, depth: int) -> None:
        for token in sorted(node):
            lines.append("  " * depth + str(token))
            render(node[token], depth + 1)

    render(trie, indent)
    return "\n".join(lines)
