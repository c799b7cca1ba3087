"""Knowledge-graph constrained decoding.

Forces a token-generating language model to emit well-formed chains of fact
triplets grounded in a knowledge graph: a query-centric subgraph supplies the
candidate triplets, a token trie masks the logits, and a two-level beam search
ranks the resulting chains.
"""

from .data import (
    DEFAULT_TEMPLATE,
    DecodeTrace,
    QaInstance,
    build_prompt,
    check_template,
    aggregate_metrics,
    decode_instance,
    load_dataset,
    run_dataset,
    write_traces,
)
from .decode import (
    BeamCandidate,
    DecodeConfig,
    DecoderState,
    Phase,
    Terminator,
    constrained_decode,
    generate_triplet,
    run_unconstrained,
)
from .kg import (
    KnowledgeGraph,
    ScoredTriplet,
    Triplet,
    linearize,
    load_graph,
    select_topk_connected,
)
from .metrics import extract_answers, hits_at_1, ill_triplet_rate, triplet_f1
from .scorers import (
    LmScorer,
    RandomLogitScorer,
    ScorerSpec,
    ScriptedScorer,
    TableScorer,
    parse_scorer_spec,
)
from .subgraph import QuerySubgraph, expand, init_subgraph, validate_chain
from .tokens import Vocabulary, build_vocabulary, parse_triplet, serialize_triplet
from .trie import build_trie, find_valid_tokens, mask_logits

__version__ = "0.1.0"

__all__ = [
    "BeamCandidate",
    "DecodeConfig",
    "DecodeTrace",
    "DecoderState",
    "DEFAULT_TEMPLATE",
    "KnowledgeGraph",
    "LmScorer",
    "Phase",
    "QaInstance",
    "QuerySubgraph",
    "RandomLogitScorer",
    "ScorerSpec",
    "ScoredTriplet",
    "ScriptedScorer",
    "TableScorer",
    "Terminator",
    "Triplet",
    "Vocabulary",
    "aggregate_metrics",
    "build_prompt",
    "check_template",
    "build_trie",
    "build_vocabulary",
    "constrained_decode",
    "decode_instance",
    "expand",
    "extract_answers",
    "find_valid_tokens",
    "generate_triplet",
    "hits_at_1",
    "ill_triplet_rate",
    "init_subgraph",
    "linearize",
    "load_dataset",
    "load_graph",
    "mask_logits",
    "parse_scorer_spec",
    "parse_triplet",
    "run_dataset",
    "run_unconstrained",
    "select_topk_connected",
    "serialize_triplet",
    "triplet_f1",
    "validate_chain",
    "write_traces",
]
