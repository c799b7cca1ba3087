"""Session API exposing the step-wise decoding constraints to host frameworks.

A host (an inference server, a logits-processor plugin, a streaming token
callback) opens a session over a triple set, feeds back every token it emits,
and receives after each one the current phase, the set of token ids its own
tokenizer may produce next while a triplet is open, and the completed triplet
whenever one closes. Token ids are the host's: the vocab spec maps the host
tokenizer's ids onto the whitespace symbols the constraint engine works with,
so the engine's internal ids never leak across the boundary.

Both a `Session` class and a flat handle-based facade (`open_session`,
`feed_token`, `allowed_tokens`, `close_session`) are provided; the facade
mirrors the shape of foreign-function interfaces where only integers and
plain dicts cross the boundary.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Sequence

from kgcd.decode import ContractViolation, DecoderState, Phase
from kgcd.kg import KnowledgeGraph, Triplet
from kgcd.subgraph import init_subgraph
from kgcd.tokens import RESERVED_TOKENS, build_vocabulary, triplet_surface


class VocabSpecError(ValueError):
    """The host vocabulary spec is incomplete or inconsistent."""


class SessionError(RuntimeError):
    """The session cannot service the request (closed, bad handle, ...)."""


@dataclass(frozen=True)
class PhaseReport:
    """What the host learns from feeding one token."""

    phase: str  # "constrained" | "unconstrained"
    triplet_completed: tuple[str, str, str] | None
    allowed: tuple[int, ...] | None  # host token ids; None outside a triplet
    closed: bool

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "triplet_completed": list(self.triplet_completed)
            if self.triplet_completed
            else None,
            "allowed": list(self.allowed) if self.allowed is not None else None,
            "closed": self.closed,
        }


def _check_vocab_spec(spec: dict) -> tuple[int, int, int, dict[str, int]]:
    try:
        specials = (int(spec["t_bos_id"]), int(spec["t_eos_id"]), int(spec["eos_id"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise VocabSpecError(
            "vocab spec must declare integer t_bos_id, t_eos_id and eos_id"
        ) from exc
    if len(set(specials)) != 3 or any(i < 0 for i in specials):
        raise VocabSpecError("special token ids must be distinct and non-negative")
    tokens = dict(spec.get("tokens", {}))
    for symbol, host_id in tokens.items():
        if not isinstance(symbol, str) or " " in symbol:
            raise VocabSpecError(f"invalid token symbol: {symbol!r}")
        if not isinstance(host_id, int) or host_id < 0:
            raise VocabSpecError(f"invalid host id for {symbol!r}: {host_id!r}")
    ids = list(specials) + list(tokens.values())
    if len(set(ids)) != len(ids):
        raise VocabSpecError("host token ids must be unique")
    return (*specials, tokens)


class Session:
    """One graph-constrained generation stream owned by a single host."""

    def __init__(
        self,
        triples: Sequence[Sequence[str]],
        query_entities: Sequence[str],
        vocab_spec: dict,
    ):
        if not triples:
            raise ValueError("triples must be non-empty")
        if not query_entities:
            raise ValueError("query_entities must be non-empty")
        t_bos, t_eos, eos, tokens = _check_vocab_spec(vocab_spec)
        graph = KnowledgeGraph(Triplet(*row) for row in triples)
        vocab = build_vocabulary(
            [triplet_surface(t) for t in graph] + [" ".join(tokens)]
        )
        needed = set(vocab.tokens) - set(RESERVED_TOKENS)
        missing = needed - tokens.keys()
        if missing:
            raise VocabSpecError(
                f"vocab spec is missing graph symbols: {sorted(missing)}"
            )
        self._host_to_core = {t_bos: vocab.t_bos_id, t_eos: vocab.t_eos_id, eos: vocab.eos_id}
        for symbol, host_id in tokens.items():
            self._host_to_core[host_id] = vocab.id_of(symbol)
        self._core_to_host = {c: h for h, c in self._host_to_core.items()}
        self._state = DecoderState(init_subgraph(graph, query_entities), vocab)

    @property
    def closed(self) -> bool:
        return self._state.closed

    @property
    def phase(self) -> str:
        return self._state.phase.value

    def allowed(self) -> tuple[int, ...] | None:
        """Host ids permitted next while a triplet is open; None otherwise."""
        if self._state.closed or self._state.phase is not Phase.CONSTRAINED:
            return None
        return tuple(sorted(self._core_to_host[c] for c in self._state.allowed()))

    def feed(self, token_id: int) -> PhaseReport:
        if self._state.closed:
            raise SessionError("session is closed")
        core_id = self._host_to_core.get(token_id)
        if core_id is None:
            raise ValueError(f"token id {token_id} is not in the session vocabulary")
        completed = self._state.feed(core_id)
        return PhaseReport(
            phase=self._state.phase.value,
            triplet_completed=(completed.head, completed.relation, completed.tail)
            if completed
            else None,
            allowed=self.allowed(),
            closed=self._state.closed,
        )

    def close(self) -> None:
        self._state.closed = True


_sessions: dict[int, Session] = {}
_handles = itertools.count(1)
_lock = threading.Lock()


def open_session(
    triples: Sequence[Sequence[str]],
    query_entities: Sequence[str],
    vocab_spec: dict,
) -> int:
    """Create a session and return its integer handle."""
    session = Session(triples, query_entities, vocab_spec)
    with _lock:
        handle = next(_handles)
        _sessions[handle] = session
    return handle


def _get(handle: int) -> Session:
    session = _sessions.get(handle)
    if session is None:
        raise SessionError(f"unknown session handle: {handle}")
    return session


def feed_token(handle: int, token_id: int) -> dict:
    """Advance the session by one host token; returns the phase report."""
    return _get(handle).feed(token_id).to_dict()


def allowed_tokens(handle: int) -> list[int] | None:
    allowed = _get(handle).allowed()
    return list(allowed) if allowed is not None else None


def close_session(handle: int) -> None:
    with _lock:
        session = _sessions.pop(handle, None)
    if session is None:
        raise SessionError(f"unknown session handle: {handle}")
    session.close()


__all__ = [
    "ContractViolation",
    "PhaseReport",
    "Session",
    "SessionError",
    "VocabSpecError",
    "allowed_tokens",
    "close_session",
    "feed_token",
    "open_session",
]
