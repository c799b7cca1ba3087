"""Host-facing bindings for the graph-constrained decoding engine."""
from .sessions import (
    ContractViolation,
    PhaseReport,
    Session,
    SessionError,
    VocabSpecError,
    allowed_tokens,
    close_session,
    feed_token,
    open_session,
)

__version__ = "0.1.0"

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
