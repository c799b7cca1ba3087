"""Shared fixtures; the tests directory is put on sys.path for helpers."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgcd.kg import KnowledgeGraph, Triplet


@pytest.fixture
def toy_graph() -> KnowledgeGraph:
    return KnowledgeGraph(
        [Triplet("A", "r1", "B"), Triplet("B", "r2", "C"), Triplet("A", "r3", "D")]
    )
