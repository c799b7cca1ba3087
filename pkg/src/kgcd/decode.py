"""Constrained chain decoding: phase machine, token-level and chain-level beams.

Generation alternates between two phases. In the unconstrained phase the
model free-runs greedily until it opens a triplet ("<"), ends the sequence
(eos) or exhausts the span budget. In the constrained phase only tokens that
continue some subgraph triplet may be emitted; a token-level beam search under
the trie mask returns up to beam_size completed triplets with their summed
log-probabilities. A chain-level beam then keeps the beam_size best candidate
chains by cumulative score after every reasoning step.

Token-level beam semantics: at every step the top beam_size extensions across
all live hypotheses (score-descending, ties by generation order) are kept;
extensions ending with the close marker move to the finished pool. With
beam_size=1 this reduces exactly to greedy decoding under the mask.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .kg import KnowledgeGraph, Triplet
from .subgraph import QuerySubgraph, expand, init_subgraph
from .tokens import TokenSeq, Vocabulary, parse_triplet
from .trie import TrieNode, build_trie, find_valid_tokens, masked_log_probs

TraceHook = Callable[[str, object], None]


class DeadEndError(RuntimeError):
    """Constrained generation was requested with an empty subgraph."""


class NoChainError(RuntimeError):
    """Every candidate dead-ended before producing a single reasoning step."""


class Phase(enum.Enum):
    CONSTRAINED = "constrained"
    UNCONSTRAINED = "unconstrained"


class Terminator(enum.Enum):
    T_BOS = "t_bos"
    EOS = "eos"
    BUDGET = "budget"


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 1
    max_steps: int = 4
    max_unconstrained_tokens: int = 128
    seed: int = 0
    length_normalize: bool = False  # divide triplet scores by token count (experimental)

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.max_unconstrained_tokens < 1:
            raise ValueError("max_unconstrained_tokens must be >= 1")


@dataclass
class BeamCandidate:
    context: TokenSeq  # prompt + everything generated so far
    subgraph: QuerySubgraph
    chain_score: float
    chain: list[Triplet]
    finished: bool = False
    dead_end: bool = False
    step_scores: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class TripletResult:
    triplet: Triplet
    tokens: TokenSeq  # tokens emitted after the open marker, through the close marker
    score: float


def run_unconstrained(
    scorer,
    context: Sequence[int],
    vocab: Vocabulary,
    budget: int,
    trace: TraceHook | None = None,
) -> tuple[TokenSeq, Terminator]:
    """Greedy free generation until a triplet opens, eos, or the budget runs out.

    The triplet-open marker is included in the returned span; eos is not.
    """
    span: TokenSeq = []
    ctx = list(context)
    for _ in range(budget):
        logits = scorer.next_logits(ctx + span)
        token = int(np.argmax(logits))
        if token == vocab.eos_id:
            return span, Terminator.EOS
        span.append(token)
        if trace is not None:
            trace("token", token)
        if token == vocab.t_bos_id:
            return span, Terminator.T_BOS
    return span, Terminator.BUDGET


def generate_triplet(
    scorer,
    context: Sequence[int],
    subgraph: QuerySubgraph,
    vocab: Vocabulary,
    bs: int,
    trie: TrieNode | None = None,
    trace: TraceHook | None = None,
    length_normalize: bool = False,
) -> list[TripletResult]:
    """Token-level beam search for up to bs completed triplets, best first.

    The context must end with the triplet-open marker. Scores sum the masked
    log-probabilities of every emitted token including the close marker; the
    open marker itself was produced unconstrained and contributes nothing.
    """
    if len(subgraph) == 0:
        raise DeadEndError("cannot generate a triplet from an empty subgraph")
    if not context or context[-1] != vocab.t_bos_id:
        raise ValueError("context must end with the triplet-open marker")
    if trie is None:
        trie = build_trie(subgraph.triplets, vocab)
    ctx = list(context)
    t_bos, t_eos = vocab.t_bos_id, vocab.t_eos_id

    beams: list[tuple[TokenSeq, float]] = [([], 0.0)]
    finished: list[tuple[TokenSeq, float]] = []

    def kth_finished_score() -> float:
        return sorted((s for _, s in finished), reverse=True)[bs - 1]

    while beams:
        extensions: list[tuple[TokenSeq, float]] = []
        for tokens, score in beams:
            valid = find_valid_tokens(trie, [t_bos] + tokens)
            if not valid:
                continue  # unreachable for a well-built trie: every path ends at t_eos
            if trace is not None:
                trace("valid_set", frozenset(valid))
            log_probs = masked_log_probs(scorer.next_logits(ctx + tokens), valid)
            for token in sorted(valid):
                extensions.append((tokens + [token], score + float(log_probs[token])))
        extensions.sort(key=lambda e: -e[1])  # stable: ties keep generation order
        beams = []
        for tokens, score in extensions[:bs]:
            if tokens[-1] == t_eos:
                finished.append((tokens, score))
            else:
                beams.append((tokens, score))
        if len(finished) >= bs and beams:
            best_live = max(s for _, s in beams)
            if best_live <= kth_finished_score():
                break  # log-probs only decrease; no live beam can still enter the top bs

    finished.sort(key=lambda e: -e[1])
    results = []
    for tokens, score in finished[:bs]:
        if length_normalize:
            score = score / len(tokens)
        results.append(
            TripletResult(
                triplet=parse_triplet(vocab, [t_bos] + tokens), tokens=tokens, score=score
            )
        )
    return results


def constrained_decode(
    scorer,
    prompt: Sequence[int],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
    vocab: Vocabulary,
    config: DecodeConfig,
    trace: TraceHook | None = None,
) -> list[BeamCandidate]:
    """Full chain-level beam decode; returns candidates best-first.

    Each chain step runs the parent's unconstrained span once, then branches
    on up to beam_size generated triplets; the candidate pool is truncated to
    beam_size by chain score after every step (finished candidates compete
    under their frozen scores). Dead ends close a candidate; if the very first
    step dead-ends everywhere, no chain exists and NoChainError is raised.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    bs = config.beam_size
    pool = [
        BeamCandidate(
            context=list(prompt),
            subgraph=init_subgraph(graph, query_entities),
            chain_score=0.0,
            chain=[],
        )
    ]
    for step in range(config.max_steps):
        if all(c.finished for c in pool):
            break
        successors: list[BeamCandidate] = []
        for cand in pool:
            if cand.finished:
                successors.append(cand)
                continue
            span, term = run_unconstrained(
                scorer, cand.context, vocab, config.max_unconstrained_tokens, trace=trace
            )
            ctx = cand.context + span
            if term is not Terminator.T_BOS:
                if term is Terminator.EOS:
                    ctx = ctx + [vocab.eos_id]
                successors.append(replace(cand, context=ctx, finished=True))
                continue
            if len(cand.subgraph) == 0:
                successors.append(
                    replace(cand, context=ctx, finished=True, dead_end=True)
                )
                continue
            results = generate_triplet(
                scorer,
                ctx,
                cand.subgraph,
                vocab,
                bs,
                trace=trace,
                length_normalize=config.length_normalize,
            )
            for res in results:
                if trace is not None:
                    trace("triplet", res.triplet)
                successors.append(
                    BeamCandidate(
                        context=ctx + res.tokens,
                        subgraph=expand(cand.subgraph, res.triplet),
                        chain_score=cand.chain_score + res.score,
                        chain=cand.chain + [res.triplet],
                        step_scores=cand.step_scores + [res.score],
                    )
                )
        pool = _truncate_pool(successors, bs)
        if step == 0 and all(c.dead_end for c in pool):
            raise NoChainError("all candidates dead-ended before the first step")
    for i, cand in enumerate(pool):
        if cand.finished:
            continue
        span, term = run_unconstrained(
            scorer, cand.context, vocab, config.max_unconstrained_tokens, trace=trace
        )
        ctx = cand.context + span
        if term is Terminator.EOS:
            ctx = ctx + [vocab.eos_id]
        pool[i] = replace(cand, context=ctx, finished=True)
    pool.sort(key=lambda c: -c.chain_score)  # stable: ties keep generation order
    return pool


def _truncate_pool(candidates: list[BeamCandidate], bs: int) -> list[BeamCandidate]:
    """Merge duplicate contexts (keep the higher score), then keep the top bs."""
    merged: dict[tuple[int, ...], BeamCandidate] = {}
    for cand in candidates:
        key = tuple(cand.context)
        held = merged.get(key)
        if held is None or cand.chain_score > held.chain_score:
            merged[key] = cand
    pool = sorted(merged.values(), key=lambda c: -c.chain_score)
    return pool[:bs]


@dataclass
class DecoderState:
    """Step-wise phase machine mirroring the engine, for token-by-token hosts.

    Feed tokens one at a time; the state tracks the phase, the in-progress
    triplet prefix and the constraint trie, expanding the subgraph and
    rebuilding the trie whenever a triplet completes.
    """

    subgraph: QuerySubgraph
    vocab: Vocabulary
    phase: Phase = Phase.UNCONSTRAINED
    step_prefix: TokenSeq = field(default_factory=list)
    generated: TokenSeq = field(default_factory=list)
    trie: TrieNode = field(default_factory=dict)
    closed: bool = False

    def __post_init__(self) -> None:
        if not self.trie:
            self.trie = build_trie(self.subgraph.triplets, self.vocab)

    def allowed(self) -> set[int]:
        """Valid next tokens in the constrained phase."""
        if self.phase is not Phase.CONSTRAINED:
            raise RuntimeError("allowed() is only defined in the constrained phase")
        return find_valid_tokens(self.trie, self.step_prefix)

    def feed(self, token: int) -> Triplet | None:
        """Advance by one token; returns the triplet completed by it, if any."""
        if self.closed:
            raise RuntimeError("decoder state is closed")
        if not 0 <= token < self.vocab.size:
            raise ValueError(f"token id out of range: {token}")
        if self.phase is Phase.UNCONSTRAINED:
            if token == self.vocab.eos_id:
                self.generated.append(token)
                self.closed = True
                return None
            self.generated.append(token)
            if token == self.vocab.t_bos_id:
                self.phase = Phase.CONSTRAINED
                self.step_prefix = [token]
            return None
        valid = self.allowed()
        if token not in valid:
            raise ContractViolation(
                f"token {token} is outside the allowed set {sorted(valid)}"
            )
        self.generated.append(token)
        self.step_prefix.append(token)
        if token != self.vocab.t_eos_id:
            return None
        triplet = parse_triplet(self.vocab, self.step_prefix)
        self.subgraph = expand(self.subgraph, triplet)
        self.trie = build_trie(self.subgraph.triplets, self.vocab)
        self.phase = Phase.UNCONSTRAINED
        self.step_prefix = []
        return triplet


class ContractViolation(RuntimeError):
    """The host emitted a token the mask should have excluded."""
