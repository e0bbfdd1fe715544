"""Exact cosine top-k index over embedded text units.

The index is immutable after construction, searches by full scan (corpora
here are ~1e4 units), and never thresholds scores: selection downstream is
rank-based only.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, word_count
from .embedding import EmbeddingProvider, EmbeddingVector
from .errors import DimensionError, ChecksumError, IncompatibleIndex

_MAGIC = b"RKIX"
_FORMAT_VERSION = 1


class UnitKind(Enum):
    TERM = "term"
    DEFINITION = "definition"
    COMBINED = "combined"
    SENTENCE = "sentence"
    PARAGRAPH = "paragraph"


@dataclass(frozen=True)
class UnitSpec:
    """Metadata plus text for one unit to embed and index."""

    unit_id: str
    kind: UnitKind
    doc_or_entry_id: str
    text: str
    word_count: int
    parent_para_id: str | None = None


@dataclass(frozen=True, eq=False)
class IndexEntry:
    unit_id: str
    kind: UnitKind
    doc_or_entry_id: str
    text: str
    word_count: int
    vector: EmbeddingVector
    parent_para_id: str | None = None


@dataclass(frozen=True, eq=False)
class SearchHit:
    entry: IndexEntry
    score: float
    rank: int


class Index:
    """Read-only store of embedded units answering exact top-k queries."""

    def __init__(self, entries: Sequence[IndexEntry]):
        if not entries:
            raise ValueError("index requires at least one entry")
        dims = {e.vector.dim for e in entries}
        if len(dims) != 1:
            raise DimensionError(f"mixed vector dims in index: {sorted(dims)}")
        providers = {e.vector.provider_id for e in entries}
        if len(providers) != 1:
            raise ValueError(f"mixed providers in index: {sorted(providers)}")
        ids = [e.unit_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate unit_id in index")
        for entry in entries:
            if entry.kind is UnitKind.SENTENCE and not entry.parent_para_id:
                raise ValueError(f"sentence entry {entry.unit_id!r} lacks a parent paragraph")

        self.entries: tuple[IndexEntry, ...] = tuple(entries)
        self.dim: int = dims.pop()
        self.provider_id: str = providers.pop()
        self._by_id = {e.unit_id: e for e in self.entries}
        self._matrix64 = np.stack([e.vector.values for e in self.entries]).astype(np.float64)
        self._combined_by_entry = {
            e.doc_or_entry_id: e for e in self.entries if e.kind is UnitKind.COMBINED
        }

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, unit_id: str) -> IndexEntry:
        return self._by_id[unit_id]

    def __contains__(self, unit_id: str) -> bool:
        return unit_id in self._by_id

    def combined_entry(self, doc_or_entry_id: str) -> IndexEntry:
        """The combined term-plus-definition entry for a glossary entry ID."""
        return self._combined_by_entry[doc_or_entry_id]

    def _scores(self, query_vector: EmbeddingVector, indices: np.ndarray) -> np.ndarray:
        if query_vector.dim != self.dim:
            raise DimensionError(f"query dim {query_vector.dim} != index dim {self.dim}")
        q64 = query_vector.values.astype(np.float64)
        return self._matrix64[indices] @ q64

    def _candidate_indices(self, kinds: set[UnitKind] | None) -> np.ndarray:
        if kinds is None:
            return np.arange(len(self.entries))
        return np.array(
            [i for i, e in enumerate(self.entries) if e.kind in kinds], dtype=np.intp
        )

    def search(
        self,
        query_vector: EmbeddingVector,
        k: int,
        kinds: set[UnitKind] | None = None,
    ) -> list[SearchHit]:
        """The k highest-cosine entries of the requested kinds, exact.

        Ties break by ascending unit_id. Fewer than k hits are returned only
        when the filtered index is smaller than k.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates = self._candidate_indices(kinds)
        if candidates.size == 0:
            return []
        scores = self._scores(query_vector, candidates)
        order = sorted(
            range(candidates.size),
            key=lambda i: (-scores[i], self.entries[candidates[i]].unit_id),
        )
        hits = []
        for rank, i in enumerate(order[:k], start=1):
            score = max(-1.0, min(1.0, float(scores[i])))
            hits.append(SearchHit(entry=self.entries[candidates[i]], score=score, rank=rank))
        return hits

    def search_distinct_parents(self, query_vector: EmbeddingVector, k: int) -> list[SearchHit]:
        """Top-k distinct parent paragraphs of the best-matching sentences.

        Sentences are scanned in rank order; each new parent paragraph is
        emitted at the score of its best sentence until k distinct parents
        are found. Hits reference the paragraph entries.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates = self._candidate_indices({UnitKind.SENTENCE})
        if candidates.size == 0:
            return []
        scores = self._scores(query_vector, candidates)
        order = sorted(
            range(candidates.size),
            key=lambda i: (-scores[i], self.entries[candidates[i]].unit_id),
        )
        hits: list[SearchHit] = []
        seen_parents: set[str] = set()
        for i in order:
            sentence = self.entries[candidates[i]]
            parent_id = sentence.parent_para_id
            if parent_id in seen_parents:
                continue
            seen_parents.add(parent_id)
            parent = self._by_id.get(parent_id)
            if parent is None:
                raise ValueError(
                    f"sentence {sentence.unit_id!r} parent {parent_id!r} is not indexed"
                )
            score = max(-1.0, min(1.0, float(scores[i])))
            hits.append(SearchHit(entry=parent, score=score, rank=len(hits) + 1))
            if len(hits) == k:
                break
        return hits


def build_index(specs: Iterable[UnitSpec], provider: EmbeddingProvider) -> Index:
    """Embed every unit text and assemble an immutable index."""
    specs = list(specs)
    if not specs:
        raise ValueError("cannot build an index from zero units")
    entries = []
    for spec in specs:
        try:
            vector = provider.embed(spec.text)
        except Exception as exc:
            raise type(exc)(f"embedding unit {spec.unit_id!r}: {exc}") from exc
        entries.append(
            IndexEntry(
                unit_id=spec.unit_id,
                kind=spec.kind,
                doc_or_entry_id=spec.doc_or_entry_id,
                text=spec.text,
                word_count=spec.word_count,
                vector=vector,
                parent_para_id=spec.parent_para_id,
            )
        )
    return Index(entries)


def corpus_units(corpus: Corpus) -> list[UnitSpec]:
    """Unit specs for a corpus: term/definition/combined per glossary entry,
    sentence and paragraph per document."""
    specs: list[UnitSpec] = []
    for entry in corpus.glossary:
        for kind, text in (
            (UnitKind.TERM, entry.term),
            (UnitKind.DEFINITION, entry.definition),
            (UnitKind.COMBINED, entry.combined),
        ):
            specs.append(
                UnitSpec(
                    unit_id=f"{entry.entry_id}/{kind.value}",
                    kind=kind,
                    doc_or_entry_id=entry.entry_id,
                    text=text,
                    word_count=word_count(text),
                )
            )
    for doc in corpus.documents:
        for para in doc.paragraphs:
            for sent in para.sentences:
                specs.append(
                    UnitSpec(
                        unit_id=sent.sent_id,
                        kind=UnitKind.SENTENCE,
                        doc_or_entry_id=doc.doc_id,
                        text=sent.text,
                        word_count=sent.word_count,
                        parent_para_id=sent.para_id,
                    )
                )
            specs.append(
                UnitSpec(
                    unit_id=para.para_id,
                    kind=UnitKind.PARAGRAPH,
                    doc_or_entry_id=doc.doc_id,
                    text=para.text,
                    word_count=para.word_count,
                )
            )
    return specs


def save_index(index: Index, path: str | Path) -> None:
    """Write the binary index file: magic, version, JSON entry table,
    little-endian float32 vectors, trailing SHA-256 checksum."""
    header = {
        "provider_id": index.provider_id,
        "dim": index.dim,
        "count": len(index.entries),
        "entries": [
            {
                "unit_id": e.unit_id,
                "kind": e.kind.value,
                "doc_or_entry_id": e.doc_or_entry_id,
                "text": e.text,
                "word_count": e.word_count,
                "parent_para_id": e.parent_para_id,
            }
            for e in index.entries
        ],
    }
    header_bytes = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    vectors = np.stack([e.vector.values for e in index.entries]).astype("<f4")
    payload = (
        _MAGIC
        + struct.pack("<II", _FORMAT_VERSION, len(header_bytes))
        + header_bytes
        + vectors.tobytes()
    )
    digest = hashlib.sha256(payload).digest()
    Path(path).write_bytes(payload + digest)


def load_index(path: str | Path) -> Index:
    blob = Path(path).read_bytes()
    if len(blob) < len(_MAGIC) + 8 + 32:
        raise IncompatibleIndex(f"{path}: file too short to be an index")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise IncompatibleIndex(f"{path}: bad magic bytes")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    version, header_len = struct.unpack_from("<II", payload, len(_MAGIC))
    if version != _FORMAT_VERSION:
        raise IncompatibleIndex(f"{path}: unsupported format version {version}")
    header_start = len(_MAGIC) + 8
    header = json.loads(payload[header_start : header_start + header_len].decode("utf-8"))
    dim = header["dim"]
    count = header["count"]
    provider_id = header["provider_id"]
    vec_bytes = payload[header_start + header_len :]
    if len(vec_bytes) != count * dim * 4:
        raise IncompatibleIndex(f"{path}: vector payload has wrong size")
    matrix = np.frombuffer(vec_bytes, dtype="<f4").reshape(count, dim)
    entries = []
    for row, meta in zip(matrix, header["entries"]):
        vector = EmbeddingVector(np.array(row, dtype=np.float32), dim, provider_id)
        entries.append(
            IndexEntry(
                unit_id=meta["unit_id"],
                kind=UnitKind(meta["kind"]),
                doc_or_entry_id=meta["doc_or_entry_id"],
                text=meta["text"],
                word_count=meta["word_count"],
                vector=vector,
                parent_para_id=meta["parent_para_id"],
            )
        )
    return Index(entries)
