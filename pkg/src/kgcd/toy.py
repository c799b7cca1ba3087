"""Synthetic two-hop QA instances for smoke tests and demos."""
from __future__ import annotations

import random

from .data import QaInstance
from .kg import KnowledgeGraph, Triplet


def make_toy_instance(i: int, rng: random.Random) -> QaInstance:
    """A two-hop question over a small graph with a few distractor edges."""
    a, b, c = f"A{i}", f"B{i}", f"C{i}"
    gold = [Triplet(a, "first.relation", b), Triplet(b, "second.relation", c)]
    distractors = [
        Triplet(a, "side.relation", f"X{i}"),
        Triplet(f"Y{i}", "side.relation", a),
        Triplet(b, "other.relation", f"Z{i}"),
    ]
    rng.shuffle(distractors)
    triplets = [gold[0], *distractors[:2], gold[1], distractors[2]]
    return QaInstance(
        id=f"toy-{i}",
        question=f"What is reached from {a} via first.relation and then second.relation ?",
        query_entities=(a,),
        answers=(c,),
        graph=KnowledgeGraph(triplets),
        gold_chain=tuple(gold),
    )


def make_toy_dataset(n: int = 20, seed: int = 0) -> list[QaInstance]:
    rng = random.Random(seed)
    return [make_toy_instance(i, rng) for i in range(n)]


def gold_continuation_text(instance: QaInstance) -> str:
    """The ideal generation: numbered gold steps, then the answer sentence."""
    assert instance.gold_chain is not None
    parts = []
    for step, t in enumerate(instance.gold_chain, start=1):
        parts.append(f"{step}. < {t.as_text()} > This tells us about {t.tail} .")
    answer = instance.answers[0]
    parts.append(f"Therefore, the answer is * {answer}. <eos>")
    return " ".join(parts)


def gold_biased_table(instance: QaInstance) -> dict:
    """Table-scorer payload that steers decoding along the gold continuation.

    One rule per position, keyed on the full decoded context at that position,
    so the bias fires only on the gold path; everything else sees the uniform
    default.
    """
    from .data import DEFAULT_TEMPLATE, build_prompt
    from .tokens import canonical_text

    prompt = canonical_text(build_prompt(instance, DEFAULT_TEMPLATE))
    tokens = gold_continuation_text(instance).split()
    rules = []
    context = prompt
    for tok in tokens:
        rules.append({"suffix": context, "logits": {tok: 10.0}})
        context = context + " " + tok
    return {"default": 0.0, "rules": rules}
