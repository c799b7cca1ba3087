"""Dataset ingestion, prompt assembly, trace records and the evaluation loop."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .decode import BeamCandidate, DecodeConfig, constrained_decode
from .kg import KnowledgeGraph, Triplet, linearize, load_graph
from .metrics import extract_answers, hits_at_1, ill_triplet_rate, triplet_f1
from .scorers import ScorerSpec
from .tokens import build_vocabulary, canonical_text, triplet_surface

TRACE_SCHEMA = "dog_trace_v1"

ANSWER_PRIMING = "Answer: Let's break down the steps to find the answer to the question."

# Three-shot in-context prompt; exemplar labels and wording kept verbatim.
DEFAULT_TEMPLATE = """You are a helpful assistant that can analyse the knowledge graphs in the contexts and then answer the questions based on the knowledge graphs.

The answers should give the grounded reasoning chains and think step by step, and the reasoning chains should be logically complete but have as fewer steps as possible. Do not include information irrelvant to the question.

**Example 1:**

Context: [ Bahamas -> location.country.first_level_divisions -> Grand Cay | Grand Bahama -> location.location.containedby -> Bahamas | Bahamas -> location.location.contains -> Grand Cay | Bahamas -> location.location.contains -> Grand Bahama | Grand Cay -> location.location.containedby -> Bahamas | Bahamas -> location.country.first_level_divisions -> East Grand Bahama | Bahamas -> location.country.first_level_divisions -> West Grand Bahama | Grand Bahama -> location.location.contains -> Grand Bahama International Airport | Bahamas -> location.location.contains -> East Grand Bahama | Bahamas -> location.location.contains -> West Grand Bahama | East Grand Bahama -> location.location.containedby -> Bahamas | Bahamas -> location.location.contains -> Grand Bahama International Airport | Grand Bahama -> location.location.people_born_here -> Hubert Ingraham | Grand Cay -> location.administrative_division.first_level_division_of -> Bahamas | Bahamas -> location.country.administrative_divisions -> Cat Island, Bahamas | Bahamas -> location.country.administrative_divisions -> Long Island | West Grand Bahama -> location.location.containedby -> Bahamas | Bahamas -> location.country.capital -> Nassau | Bahamas -> location.country.administrative_divisions -> Inagua | Bahamas -> location.country.administrative_divisions -> Exuma | Grand Bahama International Airport -> location.location.containedby -> Bahamas | Grand Bahama -> location.location.people_born_here -> Juan Lewis | Grand Bahama -> location.location.contains -> West End Airport ]

Question: What country is the grand bahama island in?

Answer: Let's break down the steps to find the answer to the question.

1. < Grand Bahama -> location.location.containedby -> Bahamas > This tells us Grand Bahama is located in Bahamas.

Grand Bahama is in Bahamas. Therefore, the answer is * Bahamas.

**Example 1:**

Context: [ William Shakespeare -> people.person.profession -> Playwright | William Shakespeare -> people.person.profession -> Poet | William Shakespeare -> base.kwebbase.kwtopic.has_sentences -> By the time these works were published in 1609, Shakespeare was an acknowledged master of drama and an established country gentleman. | William Shakespeare -> people.person.profession -> Actor | William Shakespeare -> people.person.profession -> Author | William Shakespeare -> people.person.profession -> Lyricist | In the 21 years between 1592 and 1613, Shakespeare produced more than 30 plays. -> base.kwebbase.kwsentence.previous_sentence -> Above all, his humanity spanned all classes and circumstances ]

Question: What did William Shakespeare do for a living?

Answer: Let's break down the steps to find the answer to the question.

1. < William Shakespeare -> people.person.profession -> Playwright > This tells us William Shakespeare is was playwright.
2. < William Shakespeare -> people.person.profession -> Poet > This tells us William Shakespeare was a poet.

William Shakespeare was a playwright, and poet. Therefore, the answer is * playwright, and * poet.

**Example 3:**

Context: [ Carlton the Bear -> sports.mascot.team -> Toronto Maple Leafs | Toronto Maple Leafs -> sports.sports_team.team_mascot -> Carlton the Bear | Carlton the Bear -> common.topic.notable_types -> Mascot | Mascot -> type.type.properties -> Team | Toronto Maple Leafs -> sports.sports_team.previously_known_as -> Toronto St. Patricks | Team -> type.property.master_property -> Team Mascot | Toronto Maple Leafs -> sports.sports_team.previously_known_as -> Toronto Arenas | m.0crt465 -> sports.sports_league_participation.team -> Toronto Maple Leafs | Toronto St. Patricks -> sports.defunct_sports_team.later_known_as -> Toronto Maple Leafs | Toronto Maple Leafs -> sports.sports_team.sport -> Ice Hockey | Toronto St. Patricks -> sports.sports_team.sport -> Ice Hockey | Toronto Arenas -> sports.defunct_sports_team.later_known_as -> Toronto Maple Leafs | Toronto -> sports.sports_team_location.teams -> Toronto Maple Leafs | Toronto Maple Leafs -> sports.sports_team.location -> Toronto ]

Question: What is the sport played by the team with a mascot known as Carlton the Bear?

Answer: Let's break down the steps to find the answer to the question.

1. < Carlton the Bear -> sports.mascot.team -> Toronto Maple Leafs > This tells us Carlton the Bear is the mascot of the team Toronto Maple Leafs.
2. < Toronto Maple Leafs -> sports.sports_team.sport -> Ice Hockey > This tells us Toronto Maple Leafs plays Ice Hockey.

Carlton the Bear is the mascot of the team Toronto Maple Leafs which plays Ice Hockey. Therefore, the answer is * Ice Hockey.

**Example 4:**

Context: {graph}

Question: {question}

Answer: Let's break down the steps to find the answer to the question."""


class TemplateError(ValueError):
    """The prompt template is missing a required slot."""


class DatasetError(ValueError):
    """The dataset stream is empty or structurally invalid."""


@dataclass(frozen=True)
class QaInstance:
    id: str
    question: str
    query_entities: tuple[str, ...]
    answers: tuple[str, ...]
    graph: KnowledgeGraph
    gold_chain: tuple[Triplet, ...] | None = None

    def __post_init__(self) -> None:
        if not self.question:
            raise DatasetError(f"instance {self.id!r}: question is empty")
        if not self.answers:
            raise DatasetError(f"instance {self.id!r}: answers are empty")
        if not self.query_entities:
            raise DatasetError(f"instance {self.id!r}: query_entities are empty")


def check_template(template: str) -> None:
    """Each prompt slot must occur exactly once."""
    for slot in ("{graph}", "{question}"):
        if template.count(slot) != 1:
            raise TemplateError(f"template must contain {slot} exactly once")


def build_prompt(instance: QaInstance, template: str = DEFAULT_TEMPLATE) -> str:
    """Fill the {graph} and {question} slots; each must occur exactly once."""
    check_template(template)
    return template.replace("{graph}", linearize(instance.graph)).replace(
        "{question}", instance.question
    )


def instance_from_dict(obj: dict, base_dir: Path | None = None) -> QaInstance:
    if "graph" in obj:
        graph = KnowledgeGraph(Triplet(*row) for row in obj["graph"])
    elif "graph_file" in obj:
        path = Path(obj["graph_file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        graph = load_graph(path)
    else:
        raise DatasetError(f"instance {obj.get('id')!r}: no graph or graph_file")
    gold = obj.get("gold_chain")
    return QaInstance(
        id=str(obj["id"]),
        question=obj["question"],
        query_entities=tuple(obj["query_entities"]),
        answers=tuple(obj["answers"]),
        graph=graph,
        gold_chain=tuple(Triplet(*row) for row in gold) if gold else None,
    )


def load_dataset(path: str | Path) -> list[QaInstance]:
    """JSON Lines, one instance per line."""
    path = Path(path)
    instances: list[QaInstance] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                instances.append(instance_from_dict(json.loads(line), base_dir=path.parent))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{line_no}: {exc}") from exc
    if not instances:
        raise DatasetError(f"{path}: dataset is empty")
    return instances


@dataclass
class DecodeTrace:
    instance_id: str
    candidates: list[dict] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "instance_id": self.instance_id,
            "candidates": self.candidates,
            "metrics": self.metrics,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DecodeTrace":
        if obj.get("schema") != TRACE_SCHEMA:
            raise DatasetError(f"unexpected trace schema: {obj.get('schema')!r}")
        return cls(
            instance_id=obj["instance_id"],
            candidates=obj["candidates"],
            metrics=obj["metrics"],
            error=obj.get("error"),
        )


def write_traces(traces: Iterable[DecodeTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace.to_dict(), ensure_ascii=False) + "\n")


def read_traces(path: str | Path) -> list[DecodeTrace]:
    with open(path, "r", encoding="utf-8") as fh:
        return [DecodeTrace.from_dict(json.loads(line)) for line in fh if line.strip()]


def instance_vocabulary(instance: QaInstance, prompt: str, spec: ScorerSpec):
    """Whitespace vocabulary covering the prompt, the graph and the scorer."""
    texts = [canonical_text(prompt)]
    texts.extend(triplet_surface(t) for t in instance.graph)
    texts.append(" ".join(spec.vocabulary_tokens()))
    return build_vocabulary(texts)


def _candidate_record(cand: BeamCandidate, prompt_len: int, vocab) -> dict:
    generated = cand.context[prompt_len:]
    if generated and generated[-1] == vocab.eos_id:
        generated = generated[:-1]
    text = vocab.decode(generated)
    return {
        "chain": [[t.head, t.relation, t.tail] for t in cand.chain],
        "chain_score": cand.chain_score,
        "text": text,
        "predicted_answers": extract_answers(text),
    }


def decode_instance(
    instance: QaInstance,
    config: DecodeConfig,
    spec: ScorerSpec,
    template: str = DEFAULT_TEMPLATE,
) -> DecodeTrace:
    prompt = build_prompt(instance, template)
    vocab = instance_vocabulary(instance, prompt, spec)
    prompt_ids = vocab.encode(canonical_text(prompt))
    scorer = spec.build(vocab, base_len=len(prompt_ids), seed=config.seed)
    candidates = constrained_decode(
        scorer, prompt_ids, instance.graph, instance.query_entities, vocab, config
    )
    records = [_candidate_record(c, len(prompt_ids), vocab) for c in candidates]

    predicted: list[str] = []
    for record in records:  # fall back down the beam when extraction is empty
        if record["predicted_answers"]:
            predicted = record["predicted_answers"]
            break
    top_chain = candidates[0].chain
    metrics = {
        "hits_at_1": hits_at_1(predicted, instance.answers),
        "ill_triplet_rate": ill_triplet_rate(
            top_chain, instance.graph, instance.query_entities
        ),
    }
    if instance.gold_chain:
        metrics["triplet_f1"] = triplet_f1(top_chain, instance.gold_chain)
    return DecodeTrace(instance_id=instance.id, candidates=records, metrics=metrics)


def run_dataset(
    instances: Sequence[QaInstance],
    config: DecodeConfig,
    spec: ScorerSpec,
    template: str = DEFAULT_TEMPLATE,
) -> tuple[dict, list[DecodeTrace]]:
    """Decode every instance; per-instance failures are recorded, not raised."""
    if not instances:
        raise DatasetError("dataset is empty")
    traces: list[DecodeTrace] = []
    for instance in instances:
        try:
            traces.append(decode_instance(instance, config, spec, template))
        except Exception as exc:  # noqa: BLE001 - isolate per-instance failures
            traces.append(DecodeTrace(instance_id=instance.id, error=str(exc)))
    report = aggregate_metrics(traces)
    return report, traces


def aggregate_metrics(traces: Sequence[DecodeTrace]) -> dict:
    ok = [t for t in traces if t.error is None]
    report: dict = {
        "instances": len(traces),
        "decoded": len(ok),
        "errors": len(traces) - len(ok),
    }

    def mean(key: str) -> float | None:
        values = [t.metrics[key] for t in ok if key in t.metrics]
        return sum(values) / len(values) if values else None

    report["hits_at_1"] = mean("hits_at_1")
    report["triplet_f1"] = mean("triplet_f1")
    report["ill_triplet_rate"] = mean("ill_triplet_rate")
    return report
