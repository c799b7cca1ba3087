"""Triplet store: loading, indexing, linearization and connectivity-aware pre-filtering."""
from __future__ import annotations

import unicodedata
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable, Iterator, Sequence

FIELD_DELIMITER = " -> "


class GraphParseError(ValueError):
    """Malformed triple file content."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UnknownEntityError(KeyError):
    """A required entity does not occur in the graph."""


def normalize_label(label: str) -> str:
    """Canonical entity/relation form: NFC-normalized and whitespace-trimmed."""
    return unicodedata.normalize("NFC", label).strip()


@dataclass(frozen=True)
class Triplet:
    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        for name in ("head", "relation", "tail"):
            value = normalize_label(getattr(self, name))
            if not value:
                raise ValueError(f"triplet {name} is empty after trimming")
            if "\t" in value or "\n" in value:
                raise ValueError(f"triplet {name} contains a tab or newline: {value!r}")
            if FIELD_DELIMITER in value:
                raise ValueError(
                    f"triplet {name} contains the delimiter {FIELD_DELIMITER!r}: {value!r}"
                )
            object.__setattr__(self, name, value)

    def entities(self) -> tuple[str, str]:
        return (self.head, self.tail)

    def as_text(self) -> str:
        return f"{self.head}{FIELD_DELIMITER}{self.relation}{FIELD_DELIMITER}{self.tail}"


class KnowledgeGraph:
    """Immutable, deduplicated triplet set with an entity-incidence index.

    The incidence index stores, per entity, the indices of triplets where the
    entity occurs, once per role (a self-loop contributes its index twice).
    """

    def __init__(self, triplets: Iterable[Triplet]):
        ordered: list[Triplet] = []
        seen: set[Triplet] = set()
        for t in triplets:
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        self._triplets: tuple[Triplet, ...] = tuple(ordered)
        self._members = seen
        index: dict[str, list[int]] = {}
        for i, t in enumerate(self._triplets):
            index.setdefault(t.head, []).append(i)
            index.setdefault(t.tail, []).append(i)
        self._index = index

    @property
    def triplets(self) -> tuple[Triplet, ...]:
        return self._triplets

    @property
    def entities(self) -> set[str]:
        return set(self._index)

    def incidence(self, entity: str) -> list[int]:
        return list(self._index.get(normalize_label(entity), ()))

    def neighbors(self, entity: str) -> list[Triplet]:
        """All triplets incident to the entity, in insertion order."""
        out: list[Triplet] = []
        last = -1
        for i in self._index.get(normalize_label(entity), ()):
            if i != last:  # self-loops are indexed once per role
                out.append(self._triplets[i])
            last = i
        return out

    def __contains__(self, t: Triplet) -> bool:
        return t in self._members

    def __len__(self) -> int:
        return len(self._triplets)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self._triplets)


def load_graph(source: IO[str] | str | Path) -> KnowledgeGraph:
    """Parse a UTF-8 TSV triple stream (head/relation/tail per line).

    Lines starting with "#" and blank lines are skipped; duplicate triplets are
    silently merged.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_graph(fh)
    triplets: list[Triplet] = []
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise GraphParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", line_no
            )
        try:
            triplets.append(Triplet(*fields))
        except ValueError as exc:
            raise GraphParseError(str(exc), line_no) from exc
    return KnowledgeGraph(triplets)


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in graph:
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


def linearize(graph: KnowledgeGraph) -> str:
    """Render the graph as "[ h -> r -> t | ... ]" in insertion order."""
    if len(graph) == 0:
        raise ValueError("cannot linearize an empty graph")
    return "[ " + " | ".join(t.as_text() for t in graph) + " ]"


@dataclass(frozen=True)
class ScoredTriplet:
    triplet: Triplet
    score: float

    def __post_init__(self) -> None:
        if not _isfinite(self.score):
            raise ValueError(f"non-finite similarity score: {self.score!r}")


def _isfinite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


SimilarityScorer = Callable[[Triplet, str], float]


def lexical_overlap_scorer(triplet: Triplet, question: str) -> float:
    """Crude similarity baseline: fraction of question words present in the triplet."""
    q_words = {w.casefold() for w in question.split()}
    if not q_words:
        return 0.0
    t_words = {
        w.casefold()
        for field in (triplet.head, triplet.relation, triplet.tail)
        for w in field.replace(".", " ").replace("_", " ").split()
    }
    return len(q_words & t_words) / len(q_words)


def _multi_source_bfs(
    graph: KnowledgeGraph, sources: Sequence[str]
) -> tuple[dict[str, int], dict[str, tuple[str, int] | None]]:
    """Undirected BFS over the incidence structure from all sources at once.

    Returns (distance, parent) where parent maps an entity to the
    (previous entity, triplet index) used to reach it; ties are broken by
    lowest triplet index because incidence lists are scanned in index order.
    """
    dist: dict[str, int] = {}
    parent: dict[str, tuple[str, int] | None] = {}
    queue: deque[str] = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            parent[s] = None
            queue.append(s)
    while queue:
        entity = queue.popleft()
        for idx in graph.incidence(entity):
            t = graph.triplets[idx]
            other = t.tail if t.head == entity else t.head
            if other not in dist:
                dist[other] = dist[entity] + 1
                parent[other] = (entity, idx)
                queue.append(other)
    return dist, parent


def select_topk_connected(
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
    scorer: SimilarityScorer,
    question: str,
    k: int,
) -> KnowledgeGraph:
    """Greedy similarity-ranked selection that preserves connectivity.

    Triplets are ranked by descending scorer value (ties by insertion order);
    each pick pulls in the shortest-path triplets connecting it to a query
    entity. Selection stops once the result holds at least k triplets, so the
    final path addition may overshoot k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    queries = [normalize_label(e) for e in query_entities]
    for e in queries:
        if not graph.incidence(e):
            raise UnknownEntityError(e)
    scores = []
    for t in graph:
        s = float(scorer(t, question))
        if not _isfinite(s):
            raise ValueError(f"scorer returned non-finite value for {t.as_text()!r}")
        scores.append(s)
    ranked = sorted(range(len(graph)), key=lambda i: (-scores[i], i))
    dist, parent = _multi_source_bfs(graph, queries)

    selected: list[int] = []
    chosen: set[int] = set()

    def add(idx: int) -> None:
        if idx not in chosen:
            chosen.add(idx)
            selected.append(idx)

    for i in ranked:
        if len(selected) >= k:
            break
        if i in chosen:
            continue
        t = graph.triplets[i]
        endpoint = None
        for e in (t.head, t.tail):
            if e in dist and (endpoint is None or dist[e] < dist[endpoint]):
                endpoint = e
        if endpoint is None:
            continue  # disconnected from every query entity; cannot keep the result connected
        path: list[int] = []
        node = endpoint
        while parent[node] is not None:
            prev, idx = parent[node]  # type: ignore[misc]
            path.append(idx)
            node = prev
        for idx in reversed(path):
            add(idx)
        add(i)
    return KnowledgeGraph(graph.triplets[i] for i in selected)
