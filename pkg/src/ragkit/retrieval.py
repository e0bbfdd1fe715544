"""Retrieval strategies over the index.

Selection is rank-based everywhere: no strategy accepts or applies a score
threshold, and the glossary-best merge combines searches by rank because
scores from different embedding spaces are not comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .embedding import EmbeddingProvider
from .errors import EmptyInput
from .index import Index, SearchHit, UnitKind


class StrategyKind(Enum):
    GLOSSARY_TERM = "glossary-term"
    GLOSSARY_DEFINITION = "glossary-definition"
    GLOSSARY_COMBINED = "glossary-combined"
    GLOSSARY_BEST = "glossary-best"
    SENTENCE_TO_PARAGRAPH = "sentence-to-paragraph"
    PARAGRAPH_DIRECT = "paragraph-direct"


_GLOSSARY_MODES = {
    StrategyKind.GLOSSARY_TERM: UnitKind.TERM,
    StrategyKind.GLOSSARY_DEFINITION: UnitKind.DEFINITION,
    StrategyKind.GLOSSARY_COMBINED: UnitKind.COMBINED,
}
_MODE_STRATEGIES = {kind: strategy for strategy, kind in _GLOSSARY_MODES.items()}


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    strategy: StrategyKind
    query_text: str
    hits: tuple[SearchHit, ...]
    context_texts: tuple[str, ...]


def _embed_query(provider: EmbeddingProvider, query: str):
    if not query or not query.strip():
        raise EmptyInput("query is empty")
    return provider.embed(query)


def retrieve_glossary(
    index: Index,
    provider: EmbeddingProvider,
    query: str,
    k: int = 3,
    mode: UnitKind = UnitKind.COMBINED,
) -> RetrievalResult:
    """Search one glossary embedding space (term, definition, or combined).

    Whatever space matched, the generator context is always the combined
    term-plus-definition text of the hit entries.
    """
    if mode not in _MODE_STRATEGIES:
        raise ValueError(f"mode must be a glossary kind, got {mode}")
    strategy = _MODE_STRATEGIES[mode]
    hits = index.search(_embed_query(provider, query), k, kinds={mode})
    contexts = tuple(index.combined_entry(h.entry.doc_or_entry_id).text for h in hits)
    return RetrievalResult(strategy=strategy, query_text=query, hits=tuple(hits), context_texts=contexts)


def retrieve_glossary_best(
    index: Index,
    provider: EmbeddingProvider,
    query: str,
    k: int = 3,
) -> RetrievalResult:
    """Merge term and definition searches by per-entry best rank.

    Each glossary entry keeps the better (smaller) of its two ranks; equal
    ranks order term hits before definition hits. Scores are reported from
    the winning search but are never compared across the two spaces.
    """
    query_vector = _embed_query(provider, query)
    term_hits = index.search(query_vector, k, kinds={UnitKind.TERM})
    definition_hits = index.search(query_vector, k, kinds={UnitKind.DEFINITION})

    best: dict[str, tuple[int, int, SearchHit]] = {}
    for mode_order, hits in ((0, term_hits), (1, definition_hits)):
        for hit in hits:
            entry_id = hit.entry.doc_or_entry_id
            key = (hit.rank, mode_order, hit)
            if entry_id not in best or key[:2] < best[entry_id][:2]:
                best[entry_id] = key
    merged = sorted(best.items(), key=lambda item: (item[1][0], item[1][1], item[0]))[:k]

    hits = tuple(
        SearchHit(entry=source_hit.entry, score=source_hit.score, rank=rank)
        for rank, (_, (_, _, source_hit)) in enumerate(merged, start=1)
    )
    contexts = tuple(index.combined_entry(h.entry.doc_or_entry_id).text for h in hits)
    return RetrievalResult(
        strategy=StrategyKind.GLOSSARY_BEST,
        query_text=query,
        hits=hits,
        context_texts=contexts,
    )


def retrieve_sentence_to_paragraph(
    index: Index,
    provider: EmbeddingProvider,
    query: str,
    k: int = 3,
) -> RetrievalResult:
    """Sentence-level search deduplicated to the top-k distinct parent paragraphs."""
    hits = index.search_distinct_parents(_embed_query(provider, query), k)
    return RetrievalResult(
        strategy=StrategyKind.SENTENCE_TO_PARAGRAPH,
        query_text=query,
        hits=tuple(hits),
        context_texts=tuple(h.entry.text for h in hits),
    )


def retrieve_paragraph_direct(
    index: Index,
    provider: EmbeddingProvider,
    query: str,
    k: int = 3,
) -> RetrievalResult:
    """Plain top-k search over paragraph embeddings."""
    hits = index.search(_embed_query(provider, query), k, kinds={UnitKind.PARAGRAPH})
    return RetrievalResult(
        strategy=StrategyKind.PARAGRAPH_DIRECT,
        query_text=query,
        hits=tuple(hits),
        context_texts=tuple(h.entry.text for h in hits),
    )


def run_strategy(
    index: Index,
    provider: EmbeddingProvider,
    strategy: StrategyKind,
    query: str,
    k: int = 3,
) -> RetrievalResult:
    """Dispatch a query to the named strategy."""
    if strategy in _GLOSSARY_MODES:
        return retrieve_glossary(index, provider, query, k, mode=_GLOSSARY_MODES[strategy])
    if strategy is StrategyKind.GLOSSARY_BEST:
        return retrieve_glossary_best(index, provider, query, k)
    if strategy is StrategyKind.SENTENCE_TO_PARAGRAPH:
        return retrieve_sentence_to_paragraph(index, provider, query, k)
    if strategy is StrategyKind.PARAGRAPH_DIRECT:
        return retrieve_paragraph_direct(index, provider, query, k)
    raise ValueError(f"unknown strategy {strategy}")
