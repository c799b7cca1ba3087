import pytest

from kgcd_bindings import (
    ContractViolation,
    Session,
    SessionError,
    VocabSpecError,
    allowed_tokens,
    close_session,
    feed_token,
    open_session,
)
from kgcd.tokens import serialize_triplet
from session_testutil import engine_vocab, rows, vocab_spec_for


def toy_session(graph, shift=0):
    vocab = engine_vocab(graph)
    return Session(rows(graph), ["A"], vocab_spec_for(vocab, shift)), vocab


class TestOpen:
    def test_starts_unconstrained(self, toy_graph):
        session, _ = toy_session(toy_graph)
        assert session.phase == "unconstrained"
        assert not session.closed
        assert session.allowed() is None

    def test_empty_triples_rejected(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        with pytest.raises(ValueError, match="triples"):
            Session([], ["A"], vocab_spec_for(vocab))

    def test_empty_query_entities_rejected(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        with pytest.raises(ValueError, match="query_entities"):
            Session(rows(toy_graph), [], vocab_spec_for(vocab))

    @pytest.mark.parametrize("missing", ["t_bos_id", "t_eos_id", "eos_id"])
    def test_missing_special_id_rejected(self, toy_graph, missing):
        vocab = engine_vocab(toy_graph)
        spec = vocab_spec_for(vocab)
        del spec[missing]
        with pytest.raises(VocabSpecError):
            Session(rows(toy_graph), ["A"], spec)

    def test_duplicate_host_ids_rejected(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        spec = vocab_spec_for(vocab)
        spec["t_eos_id"] = spec["t_bos_id"]
        with pytest.raises(VocabSpecError):
            Session(rows(toy_graph), ["A"], spec)

    def test_uncovered_graph_symbol_rejected(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        spec = vocab_spec_for(vocab)
        del spec["tokens"]["r1"]
        with pytest.raises(VocabSpecError, match="r1"):
            Session(rows(toy_graph), ["A"], spec)


class TestFeed:
    def test_open_marker_enters_constrained_with_root_set(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        report = session.feed(vocab.t_bos_id)
        assert report.phase == "constrained"
        # Both eligible first triplets start with "A".
        assert report.allowed == (vocab.id_of("A"),)

    def test_full_triplet_walk_completes_it(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        completed = []
        for token in serialize_triplet(vocab, toy_graph.triplets[0]):
            completed.append(session.feed(token).triplet_completed)
        assert completed[-1] == ("A", "r1", "B")
        assert all(c is None for c in completed[:-1])
        assert session.phase == "unconstrained"

    def test_second_step_sees_expanded_subgraph(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        for token in serialize_triplet(vocab, toy_graph.triplets[0]):
            session.feed(token)
        report = session.feed(vocab.t_bos_id)
        # After visiting B, triplets headed at A and B are both open.
        assert report.allowed == tuple(sorted((vocab.id_of("A"), vocab.id_of("B"))))

    def test_disallowed_token_is_contract_violation(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        session.feed(vocab.t_bos_id)
        with pytest.raises(ContractViolation):
            session.feed(vocab.id_of("B"))

    def test_eos_closes_session(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        report = session.feed(vocab.eos_id)
        assert report.closed and session.closed
        with pytest.raises(SessionError):
            session.feed(vocab.id_of("A"))

    def test_unknown_token_id_rejected(self, toy_graph):
        session, vocab = toy_session(toy_graph)
        with pytest.raises(ValueError, match="not in the session vocabulary"):
            session.feed(10_000)

    def test_shifted_host_ids_round_trip(self, toy_graph):
        session, vocab = toy_session(toy_graph, shift=500)
        report = session.feed(vocab.t_bos_id + 500)
        assert report.allowed == (vocab.id_of("A") + 500,)


class TestHandleFacade:
    def test_open_feed_close(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        handle = open_session(rows(toy_graph), ["A"], vocab_spec_for(vocab))
        assert allowed_tokens(handle) is None
        report = feed_token(handle, vocab.t_bos_id)
        assert report["phase"] == "constrained"
        assert report["allowed"] == [vocab.id_of("A")]
        assert allowed_tokens(handle) == [vocab.id_of("A")]
        close_session(handle)
        with pytest.raises(SessionError):
            feed_token(handle, vocab.t_bos_id)

    def test_handles_are_independent(self, toy_graph):
        vocab = engine_vocab(toy_graph)
        spec = vocab_spec_for(vocab)
        h1 = open_session(rows(toy_graph), ["A"], spec)
        h2 = open_session(rows(toy_graph), ["A"], spec)
        feed_token(h1, vocab.eos_id)
        report = feed_token(h2, vocab.t_bos_id)  # h2 unaffected by h1 closing
        assert report["phase"] == "constrained"
        close_session(h2)

    def test_unknown_handle_rejected(self):
        with pytest.raises(SessionError):
            feed_token(99_999, 0)
        with pytest.raises(SessionError):
            close_session(99_999)
