"""Independent brute-force reference implementations used by the tests.

Nothing in here touches the trie, the masking helpers or the engine's beam
bookkeeping: valid-token sets come from direct substring scans over the
serialized triplets, probabilities from plain math over the valid subset, and
subgraph/chain state from incidence recomputation. These are the oracles the
engine is checked against.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from kgcd.kg import KnowledgeGraph, Triplet, normalize_label
from kgcd.tokens import Vocabulary, triplet_surface


def serialize(vocab: Vocabulary, t: Triplet) -> list[int]:
    return vocab.encode(triplet_surface(t))


def brute_valid_tokens(serialized: Sequence[Sequence[int]], prefix: Sequence[int]) -> set[int]:
    """{x : prefix+x is a contiguous substring of some serialized sequence}."""
    prefix = list(prefix)
    n = len(prefix)
    out: set[int] = set()
    for seq in serialized:
        seq = list(seq)
        for start in range(len(seq)):
            if seq[start : start + n] == prefix and start + n < len(seq):
                out.add(seq[start + n])
    return out


def prefix_valid_tokens(serialized: Sequence[Sequence[int]], prefix: Sequence[int]) -> set[int]:
    """Exact-prefix semantics: continuations of full sequences only."""
    prefix = list(prefix)
    out: set[int] = set()
    for seq in serialized:
        seq = list(seq)
        if seq[: len(prefix)] == prefix and len(seq) > len(prefix):
            out.add(seq[len(prefix)])
    return out


class PrefixTrie:
    """Plain prefix trie (full sequences only), the anchored-lookup reference."""

    def __init__(self, sequences: Sequence[Sequence[int]]):
        self.root: dict = {}
        for seq in sequences:
            node = self.root
            for token in seq:
                node = node.setdefault(token, {})

    def next_tokens(self, prefix: Sequence[int]) -> set[int]:
        node = self.root
        for token in prefix:
            if token not in node:
                return set()
            node = node[token]
        return set(node.keys())


def masked_log_prob(logits: Sequence[float], valid: set[int], token: int) -> float:
    """log softmax restricted to the valid subset, computed with plain math."""
    values = [float(logits[i]) for i in valid]
    top = max(values)
    lse = top + math.log(sum(math.exp(v - top) for v in values))
    return float(logits[token]) - lse


def score_triplet_brute(
    scorer,
    context: Sequence[int],
    seq: Sequence[int],
    serialized_all: Sequence[Sequence[int]],
    t_bos: int,
) -> float:
    """Summed masked log-probability of a serialized triplet given the context.

    The context must already end with the triplet-open marker; the marker
    itself contributes nothing.
    """
    total = 0.0
    generated: list[int] = []
    for token in seq[1:]:
        valid = brute_valid_tokens(serialized_all, [t_bos] + generated)
        logits = scorer.next_logits(list(context) + generated)
        total += masked_log_prob(logits, valid, token)
        generated.append(token)
    return total


def closure_triplets(graph: KnowledgeGraph, visited: set[str]) -> list[Triplet]:
    """All source triplets incident to a visited entity, in insertion order."""
    return [t for t in graph if t.head in visited or t.tail in visited]


def greedy_unconstrained(
    scorer, context: list[int], vocab: Vocabulary, budget: int
) -> tuple[list[int], str]:
    ctx = list(context)
    for _ in range(budget):
        token = int(np.argmax(scorer.next_logits(ctx)))
        if token == vocab.eos_id:
            return ctx + [vocab.eos_id], "eos"
        ctx.append(token)
        if token == vocab.t_bos_id:
            return ctx, "t_bos"
    return ctx, "budget"


def reference_greedy_decode(
    scorer,
    prompt: Sequence[int],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
    vocab: Vocabulary,
    max_steps: int,
    budget: int,
) -> list[int]:
    """Single-path greedy constrained decoding, the beam_size=1 reference."""
    visited = {normalize_label(e) for e in query_entities}
    context = list(prompt)
    for _ in range(max_steps):
        context, term = greedy_unconstrained(scorer, context, vocab, budget)
        if term != "t_bos":
            return context
        subs = closure_triplets(graph, visited)
        serialized = [serialize(vocab, t) for t in subs]
        generated: list[int] = []
        while True:
            valid = brute_valid_tokens(serialized, [vocab.t_bos_id] + generated)
            logits = scorer.next_logits(context + generated)
            token = min(valid, key=lambda i: (-logits[i], i))
            generated.append(token)
            if token == vocab.t_eos_id:
                break
        context = context + generated
        interior = vocab.decode([vocab.t_bos_id] + generated).split(" ")[1:-1]
        head, _, tail = " ".join(interior).split(" -> ")
        visited |= {head, tail}
    context, _ = greedy_unconstrained(scorer, context, vocab, budget)
    return context


def exhaustive_decode_tree(
    scorer,
    prompt: Sequence[int],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
    vocab: Vocabulary,
    max_steps: int,
    budget: int,
) -> list[tuple[tuple[Triplet, ...], float, tuple[int, ...]]]:
    """Every terminal chain of the decode tree: (chain, score, context).

    At each step every triplet of the current closure is taken as a possible
    next step (scored brute-force); unconstrained spans follow the greedy
    dynamics. This is what an unbounded-width chain-level beam must return.
    """
    leaves: list[tuple[tuple[Triplet, ...], float, tuple[int, ...]]] = []

    def rec(context: list[int], visited: set[str], chain: tuple[Triplet, ...], score: float, step: int):
        ctx, term = greedy_unconstrained(scorer, context, vocab, budget)
        if step == max_steps or term != "t_bos":
            leaves.append((chain, score, tuple(ctx)))
            return
        subs = closure_triplets(graph, visited)
        serialized = [serialize(vocab, t) for t in subs]
        for t, seq in zip(subs, serialized):
            s = score_triplet_brute(scorer, ctx, seq, serialized, vocab.t_bos_id)
            rec(
                ctx + list(seq[1:]),
                visited | {t.head, t.tail},
                chain + (t,),
                score + s,
                step + 1,
            )

    rec(list(prompt), {normalize_label(e) for e in query_entities}, (), 0.0, 0)
    return leaves


def _select_triplets_beam(
    scorer,
    context: list[int],
    serialized: list[list[int]],
    subs: list[Triplet],
    vocab: Vocabulary,
    bs: int,
) -> list[tuple[Triplet, list[int], float]]:
    """Replicates the engine's token-level truncation semantics independently:
    keep the top bs extensions (score-descending, ties by hypothesis order then
    ascending token id) across all live hypotheses at every position.
    """
    t_bos, t_eos = vocab.t_bos_id, vocab.t_eos_id
    beams: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []
    while beams:
        extensions: list[tuple[list[int], float]] = []
        for tokens, score in beams:
            valid = brute_valid_tokens(serialized, [t_bos] + tokens)
            logits = scorer.next_logits(context + tokens)
            for token in sorted(valid):
                extensions.append((tokens + [token], score + masked_log_prob(logits, valid, token)))
        extensions.sort(key=lambda e: -e[1])
        beams = []
        for tokens, score in extensions[:bs]:
            if tokens[-1] == t_eos:
                finished.append((tokens, score))
            else:
                beams.append((tokens, score))
        if len(finished) >= bs and beams:
            kth = sorted((s for _, s in finished), reverse=True)[bs - 1]
            if max(s for _, s in beams) <= kth:
                break
    finished.sort(key=lambda e: -e[1])
    results = []
    for tokens, score in finished[:bs]:
        full = [t_bos] + tokens
        triplet = next(t for t, seq in zip(subs, serialized) if seq == full)
        results.append((triplet, tokens, score))
    return results


def simulate_beam_decode(
    scorer,
    prompt: Sequence[int],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
    vocab: Vocabulary,
    bs: int,
    max_steps: int,
    budget: int,
) -> list[tuple[tuple[Triplet, ...], float, tuple[int, ...]]]:
    """Independent replay of the chain-level beam (pool of bs, frozen finished
    candidates compete, stable score-descending truncation), with all scoring
    done by the brute-force helpers above. Returns (chain, score, context),
    best first.
    """
    pool = [
        {
            "context": list(prompt),
            "visited": {normalize_label(e) for e in query_entities},
            "chain": (),
            "score": 0.0,
            "finished": False,
        }
    ]
    for _ in range(max_steps):
        if all(c["finished"] for c in pool):
            break
        successors = []
        for cand in pool:
            if cand["finished"]:
                successors.append(cand)
                continue
            ctx, term = greedy_unconstrained(scorer, cand["context"], vocab, budget)
            if term != "t_bos":
                successors.append({**cand, "context": ctx, "finished": True})
                continue
            subs = closure_triplets(graph, cand["visited"])
            serialized = [serialize(vocab, t) for t in subs]
            for triplet, tokens, s in _select_triplets_beam(
                scorer, ctx, serialized, subs, vocab, bs
            ):
                successors.append(
                    {
                        "context": ctx + tokens,
                        "visited": cand["visited"] | {triplet.head, triplet.tail},
                        "chain": cand["chain"] + (triplet,),
                        "score": cand["score"] + s,
                        "finished": False,
                    }
                )
        successors.sort(key=lambda c: -c["score"])
        pool = successors[:bs]
    for cand in pool:
        if not cand["finished"]:
            cand["context"], _ = greedy_unconstrained(scorer, cand["context"], vocab, budget)
            cand["finished"] = True
    pool.sort(key=lambda c: -c["score"])
    return [(c["chain"], c["score"], tuple(c["context"])) for c in pool]
