"""Query-centric subgraph maintenance and well-formed chain validation.

The subgraph is the set of triplets eligible as the next reasoning step. It
starts from the triplets incident to the query entities and, after each
generated step, absorbs every source triplet incident to that step's
endpoints. Chains built by always drawing the next step from the current
subgraph are well-formed by construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .kg import KnowledgeGraph, Triplet, normalize_label

logger = logging.getLogger(__name__)

Chain = list[Triplet]

PROPERTY_1 = "PROPERTY_1"  # step triplet does not exist in the source graph
PROPERTY_2 = "PROPERTY_2"  # neither endpoint was visited before this step


class ContractViolationError(RuntimeError):
    """The decoder expanded with a triplet outside the current subgraph."""


@dataclass(frozen=True, eq=False)
class QuerySubgraph:
    triplets: tuple[Triplet, ...]
    visited_entities: frozenset[str]
    source: KnowledgeGraph
    missing_entities: tuple[str, ...] = ()
    _members: frozenset = field(default_factory=frozenset, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_members", frozenset(self.triplets))

    def __contains__(self, t: Triplet) -> bool:
        return t in self._members

    def __len__(self) -> int:
        return len(self.triplets)


def init_subgraph(graph: KnowledgeGraph, query_entities: Sequence[str]) -> QuerySubgraph:
    """Union of the incidence sets of the query entities.

    A query entity with no incident triplet is recorded (and logged) rather
    than rejected; source graphs may be incomplete.
    """
    if not query_entities:
        raise ValueError("query_entities must be non-empty")
    queries = [normalize_label(e) for e in query_entities]
    missing = tuple(e for e in queries if not graph.incidence(e))
    for e in missing:
        logger.warning("query entity %r has no incident triplets", e)
    indices = sorted({i for e in queries for i in graph.incidence(e)})
    return QuerySubgraph(
        triplets=tuple(graph.triplets[i] for i in indices),
        visited_entities=frozenset(queries),
        source=graph,
        missing_entities=missing,
    )


def expand(subgraph: QuerySubgraph, chosen: Triplet) -> QuerySubgraph:
    """Absorb every source triplet incident to the chosen step's endpoints.

    Monotone and idempotent; `chosen` must already be in the subgraph (it was
    generated under the constraint).
    """
    if chosen not in subgraph:
        raise ContractViolationError(
            f"expansion step {chosen.as_text()!r} is not in the current subgraph"
        )
    graph = subgraph.source
    incident = sorted(set(graph.incidence(chosen.head)) | set(graph.incidence(chosen.tail)))
    new = [t for i in incident if (t := graph.triplets[i]) not in subgraph]
    return QuerySubgraph(
        triplets=subgraph.triplets + tuple(new),
        visited_entities=subgraph.visited_entities | {chosen.head, chosen.tail},
        source=graph,
        missing_entities=subgraph.missing_entities,
    )


@dataclass(frozen=True)
class StepViolation:
    step: int  # 1-based position in the chain
    tags: tuple[str, ...]


@dataclass(frozen=True)
class ChainReport:
    well_formed: bool
    violations: tuple[StepViolation, ...]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "well_formed": self.well_formed,
            "violations": [{"step": v.step, "tags": list(v.tags)} for v in self.violations],
            "notes": list(self.notes),
        }


def validate_chain(
    chain: Sequence[Triplet],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
) -> ChainReport:
    """Check both well-formedness properties for every step.

    A step violates PROPERTY_1 if it is not a graph triplet and PROPERTY_2 if
    neither endpoint was a query entity or an endpoint of an earlier step.
    Repeated triplets are legal; they are surfaced as notes only.
    """
    visited = {normalize_label(e) for e in query_entities}
    seen: set[Triplet] = set()
    violations: list[StepViolation] = []
    notes: list[str] = []
    for i, t in enumerate(chain, start=1):
        tags: list[str] = []
        if t not in graph:
            tags.append(PROPERTY_1)
        if t.head not in visited and t.tail not in visited:
            tags.append(PROPERTY_2)
        if tags:
            violations.append(StepViolation(step=i, tags=tuple(tags)))
        if t in seen:
            notes.append(f"step {i} repeats an earlier triplet: {t.as_text()}")
        seen.add(t)
        visited.update(t.entities())
    return ChainReport(
        well_formed=not violations,
        violations=tuple(violations),
        notes=tuple(notes),
    )
