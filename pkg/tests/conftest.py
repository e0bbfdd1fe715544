"""Shared fixtures: the committed corpus, embedder, index, and expectations."""

import json
from pathlib import Path

import pytest

from ragkit.corpus import Corpus, ingest_document, ingest_glossary
from ragkit.embedding import HashingEmbedder
from ragkit.evaluation import load_query_set
from ragkit.generation import CannedChatProvider, EchoChatProvider
from ragkit.index import build_index, corpus_units

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_glossary_lines() -> str:
    return (FIXTURES / "glossary.jsonl").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    documents = tuple(
        ingest_document((FIXTURES / "docs" / name).read_text(encoding="utf-8"), Path(name).stem)
        for name in ("manual.txt", "probes.txt")
    )
    glossary = tuple(ingest_glossary((FIXTURES / "glossary.jsonl").read_text(encoding="utf-8")))
    return Corpus(documents=documents, glossary=glossary)


@pytest.fixture(scope="session")
def expected_tallies() -> dict:
    return json.loads((FIXTURES / "expected" / "tallies.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def fixture_embedder(expected_tallies) -> HashingEmbedder:
    return HashingEmbedder(dim=expected_tallies["dim"])


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus, fixture_embedder):
    return build_index(corpus_units(fixture_corpus), fixture_embedder)


@pytest.fixture(scope="session")
def fixture_queries(fixture_corpus):
    return load_query_set(FIXTURES / "queries.jsonl", known_unit_ids=fixture_corpus.unit_ids())


@pytest.fixture(scope="session")
def expected_outcomes() -> list[dict]:
    return json.loads((FIXTURES / "expected" / "outcomes.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def canned_chat() -> CannedChatProvider:
    answers = json.loads((FIXTURES / "canned_answers.json").read_text(encoding="utf-8"))
    return CannedChatProvider(answers, fallback=EchoChatProvider(order_invariant=False))
