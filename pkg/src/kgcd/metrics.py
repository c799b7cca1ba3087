"""KGQA metrics: answer extraction, Hits@1, triplet F1 and the ill-triplet rate."""
from __future__ import annotations

import re
import unicodedata
from typing import Sequence

from .kg import KnowledgeGraph, Triplet
from .subgraph import validate_chain

ANSWER_MARKER = "the answer is"


def normalize_answer(text: str) -> str:
    return " ".join(unicodedata.normalize("NFC", text).casefold().split())


def extract_answers(text: str) -> list[str]:
    """Answers are the "* "-prefixed spans after the last "the answer is".

    Trailing periods, whitespace and the ", and" joiners between spans are
    stripped; the list is empty when the marker is absent.
    """
    idx = text.rfind(ANSWER_MARKER)
    if idx < 0:
        return []
    tail = text[idx + len(ANSWER_MARKER):]
    answers: list[str] = []
    for span in tail.split("*")[1:]:
        s = span.strip()
        s = re.sub(r",?\s*\band\b\s*$", "", s.rstrip(" ."))
        s = s.rstrip(" .,;")
        if s:
            answers.append(s)
    return answers


def hits_at_1(predicted: Sequence[str], gold: Sequence[str]) -> int:
    """1 iff the first prediction matches any gold answer after normalization."""
    if not gold:
        raise ValueError("gold answers must be non-empty")
    if not predicted:
        return 0
    top = normalize_answer(predicted[0])
    return int(any(top == normalize_answer(g) for g in gold))


def triplet_f1(predicted: Sequence[Triplet], gold: Sequence[Triplet]) -> float:
    """F1 between the deduplicated predicted steps and the gold triplet set."""
    gold_set = set(gold)
    if not gold_set:
        raise ValueError("gold triplets must be non-empty")
    pred_set = set(predicted)
    if not pred_set:
        return 0.0
    overlap = len(pred_set & gold_set)
    precision = overlap / len(pred_set)
    recall = overlap / len(gold_set)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def ill_triplet_rate(
    predicted: Sequence[Triplet],
    graph: KnowledgeGraph,
    query_entities: Sequence[str],
) -> float:
    """Fraction of chain steps with any well-formedness violation; 0 when empty."""
    if not predicted:
        return 0.0
    report = validate_chain(predicted, graph, query_entities)
    return len(report.violations) / len(predicted)
