"""Index construction, exact search, distinct-parent search, and file format."""

import hashlib

import numpy as np
import pytest

from ragkit.embedding import HashingEmbedder, unit_vector
from ragkit.errors import ChecksumError, DimensionError, IncompatibleIndex
from ragkit.index import (
    Index,
    IndexEntry,
    UnitKind,
    UnitSpec,
    build_index,
    corpus_units,
    load_index,
    save_index,
)


def random_entries(rng, n, dim, n_paragraphs=None):
    """Synthetic sentence/paragraph entries with random unit vectors."""
    n_paragraphs = n_paragraphs or max(1, n // 3)
    entries = []
    for p in range(n_paragraphs):
        entries.append(
            IndexEntry(
                unit_id=f"d/p{p}",
                kind=UnitKind.PARAGRAPH,
                doc_or_entry_id="d",
                text=f"paragraph {p}",
                word_count=int(rng.integers(2, 300)),
                vector=unit_vector(rng.standard_normal(dim), dim, "rand"),
            )
        )
    for s in range(n):
        parent = f"d/p{int(rng.integers(n_paragraphs))}"
        entries.append(
            IndexEntry(
                unit_id=f"{parent}/s{s}",
                kind=UnitKind.SENTENCE,
                doc_or_entry_id="d",
                text=f"sentence {s}",
                word_count=int(rng.integers(2, 300)),
                parent_para_id=parent,
                vector=unit_vector(rng.standard_normal(dim), dim, "rand"),
            )
        )
    return entries


def brute_force_ids(index, query, k, kinds=None):
    """Independent full sort by (score desc, unit_id asc)."""
    q64 = query.values.astype(np.float64)
    scored = []
    for entry in index.entries:
        if kinds is not None and entry.kind not in kinds:
            continue
        scored.append((float(np.dot(entry.vector.values.astype(np.float64), q64)), entry.unit_id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [unit_id for _, unit_id in scored[:k]]


def brute_force_distinct_parents(index, query, k):
    q64 = query.values.astype(np.float64)
    scored = [
        (float(np.dot(e.vector.values.astype(np.float64), q64)), e.unit_id, e.parent_para_id)
        for e in index.entries
        if e.kind is UnitKind.SENTENCE
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    out, seen = [], set()
    for score, _, parent in scored:
        if parent in seen:
            continue
        seen.add(parent)
        out.append((parent, score))
        if len(out) == k:
            break
    return out


class TestSearch:
    def test_single_entry_rank_one(self):
        rng = np.random.default_rng(0)
        index = Index(random_entries(rng, 1, 16, n_paragraphs=1))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        hits = index.search(query, k=5)
        assert len(hits) == 2  # the sentence plus its paragraph
        assert hits[0].rank == 1

    def test_query_equal_to_stored_vector(self):
        rng = np.random.default_rng(1)
        entries = random_entries(rng, 20, 32)
        index = Index(entries)
        target = entries[7]
        hits = index.search(target.vector, k=1)
        assert hits[0].entry.unit_id == target.unit_id
        assert hits[0].score == pytest.approx(1.0, abs=1e-6)

    def test_k_larger_than_index_returns_all_ranked(self):
        rng = np.random.default_rng(2)
        index = Index(random_entries(rng, 5, 16))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        hits = index.search(query, k=100)
        assert len(hits) == len(index)
        assert [h.rank for h in hits] == list(range(1, len(index) + 1))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        index = Index(random_entries(rng, 1000, 32))
        for _ in range(10):
            query = unit_vector(rng.standard_normal(32), 32, "rand")
            got = [h.entry.unit_id for h in index.search(query, k=10)]
            assert got == brute_force_ids(index, query, 10)

    def test_kind_filter(self):
        rng = np.random.default_rng(4)
        index = Index(random_entries(rng, 30, 16))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        hits = index.search(query, k=10, kinds={UnitKind.PARAGRAPH})
        assert all(h.entry.kind is UnitKind.PARAGRAPH for h in hits)
        assert [h.entry.unit_id for h in hits] == brute_force_ids(
            index, query, 10, kinds={UnitKind.PARAGRAPH}
        )

    def test_empty_filtered_set_returns_empty(self):
        rng = np.random.default_rng(5)
        index = Index(random_entries(rng, 5, 16))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        assert index.search(query, k=3, kinds={UnitKind.TERM}) == []

    def test_scores_nonincreasing_ranks_consecutive(self):
        rng = np.random.default_rng(6)
        index = Index(random_entries(rng, 200, 16))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        hits = index.search(query, k=20)
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)
        assert [h.rank for h in hits] == list(range(1, 21))

    def test_tie_broken_by_ascending_unit_id(self):
        vec = unit_vector(np.ones(8), 8, "t")
        entries = [
            IndexEntry(
                unit_id=uid,
                kind=UnitKind.PARAGRAPH,
                doc_or_entry_id="d",
                text=uid,
                word_count=1,
                vector=vec,
            )
            for uid in ("d/pb", "d/pa", "d/pc")
        ]
        hits = Index(entries).search(vec, k=3)
        assert [h.entry.unit_id for h in hits] == ["d/pa", "d/pb", "d/pc"]

    def test_dim_mismatch_raises(self):
        rng = np.random.default_rng(7)
        index = Index(random_entries(rng, 5, 16))
        with pytest.raises(DimensionError):
            index.search(unit_vector(rng.standard_normal(8), 8, "rand"), k=1)

    def test_repeated_queries_identical(self):
        rng = np.random.default_rng(8)
        index = Index(random_entries(rng, 100, 16))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        first = index.search(query, k=10)
        second = index.search(query, k=10)
        assert [(h.entry.unit_id, h.score) for h in first] == [
            (h.entry.unit_id, h.score) for h in second
        ]


class TestDistinctParents:
    def test_same_paragraph_dedups_to_one(self):
        vec = unit_vector(np.ones(8), 8, "t")
        entries = [
            IndexEntry("d/p0", UnitKind.PARAGRAPH, "d", "p", 3, vec),
        ] + [
            IndexEntry(f"d/p0/s{i}", UnitKind.SENTENCE, "d", f"s{i}", 1, vec, parent_para_id="d/p0")
            for i in range(3)
        ]
        hits = Index(entries).search_distinct_parents(vec, k=2)
        assert len(hits) == 1
        assert hits[0].entry.unit_id == "d/p0"

    def test_parent_emitted_at_best_sentence_score(self):
        dim = 8
        base = np.eye(dim)
        entries = [
            IndexEntry("d/p0", UnitKind.PARAGRAPH, "d", "pA", 3, unit_vector(base[5], dim, "t")),
            IndexEntry("d/p1", UnitKind.PARAGRAPH, "d", "pB", 3, unit_vector(base[6], dim, "t")),
            IndexEntry(
                "d/p0/s0", UnitKind.SENTENCE, "d", "s1", 1,
                unit_vector(base[0], dim, "t"), parent_para_id="d/p0",
            ),
            IndexEntry(
                "d/p0/s1", UnitKind.SENTENCE, "d", "s2", 1,
                unit_vector(base[0] + 0.3 * base[1], dim, "t"), parent_para_id="d/p0",
            ),
            IndexEntry(
                "d/p1/s0", UnitKind.SENTENCE, "d", "s3", 1,
                unit_vector(base[0] + base[1], dim, "t"), parent_para_id="d/p1",
            ),
        ]
        query = unit_vector(base[0], dim, "t")
        hits = Index(entries).search_distinct_parents(query, k=2)
        assert [h.entry.unit_id for h in hits] == ["d/p0", "d/p1"]
        assert hits[0].score == pytest.approx(1.0, abs=1e-6)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        index = Index(random_entries(rng, 200, 16, n_paragraphs=20))
        for _ in range(10):
            query = unit_vector(rng.standard_normal(16), 16, "rand")
            hits = index.search_distinct_parents(query, k=5)
            expected = brute_force_distinct_parents(index, query, 5)
            assert [h.entry.unit_id for h in hits] == [p for p, _ in expected]
            for hit, (_, score) in zip(hits, expected):
                assert hit.score == pytest.approx(score, abs=1e-12)

    def test_parents_pairwise_distinct_scores_nonincreasing(self):
        rng = np.random.default_rng(12)
        index = Index(random_entries(rng, 300, 16, n_paragraphs=30))
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        hits = index.search_distinct_parents(query, k=10)
        ids = [h.entry.unit_id for h in hits]
        assert len(set(ids)) == len(ids)
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)

    def test_no_sentences_returns_empty(self):
        vec = unit_vector(np.ones(8), 8, "t")
        index = Index([IndexEntry("d/p0", UnitKind.PARAGRAPH, "d", "p", 1, vec)])
        assert index.search_distinct_parents(vec, k=3) == []


class TestBuildIndex:
    def test_glossary_yields_three_entries_each(self, fixture_corpus):
        specs = corpus_units(fixture_corpus)
        glossary_specs = [s for s in specs if s.unit_id.startswith("g")]
        assert len(glossary_specs) == 3 * len(fixture_corpus.glossary) == 90

    def test_entry_count_matches_corpus(self, fixture_corpus, fixture_index):
        sentences = sum(1 for _ in fixture_corpus.sentences())
        paragraphs = sum(1 for _ in fixture_corpus.paragraphs())
        glossary = 3 * len(fixture_corpus.glossary)
        assert len(fixture_index) == sentences + paragraphs + glossary

    def test_build_failure_names_unit(self):
        specs = [UnitSpec("u1", UnitKind.PARAGRAPH, "d", "ok text", 2),
                 UnitSpec("u2", UnitKind.PARAGRAPH, "d", "   ", 0)]
        with pytest.raises(Exception, match="u2"):
            build_index(specs, HashingEmbedder(dim=32))


class TestIndexFile:
    def _small_index(self, seed=0, n=20, dim=16):
        return Index(random_entries(np.random.default_rng(seed), n, dim))

    def test_round_trip_search_identical(self, tmp_path):
        index = self._small_index()
        path = tmp_path / "idx.bin"
        save_index(index, path)
        loaded = load_index(path)
        rng = np.random.default_rng(99)
        query = unit_vector(rng.standard_normal(16), 16, "rand")
        before = [(h.entry.unit_id, h.score) for h in index.search(query, k=10)]
        after = [(h.entry.unit_id, h.score) for h in loaded.search(query, k=10)]
        assert before == after

    def test_round_trip_vectors_byte_identical(self, tmp_path):
        index = Index(random_entries(np.random.default_rng(5), 10_000, 32))
        path = tmp_path / "idx.bin"
        save_index(index, path)
        loaded = load_index(path)
        original = np.stack([e.vector.values for e in index.entries]).tobytes()
        restored = np.stack([e.vector.values for e in loaded.entries]).tobytes()
        assert hashlib.sha256(original).digest() == hashlib.sha256(restored).digest()

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(IncompatibleIndex):
            load_index(path)

    def test_corruption_fails_checksum(self, tmp_path):
        index = self._small_index()
        path = tmp_path / "idx.bin"
        save_index(index, path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            load_index(path)

    def test_unsupported_version_rejected(self, tmp_path):
        index = self._small_index()
        path = tmp_path / "idx.bin"
        save_index(index, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99  # version field, little-endian u32 after 4 magic bytes
        payload = bytes(blob[:-32])
        path.write_bytes(payload + hashlib.sha256(payload).digest())
        with pytest.raises(IncompatibleIndex):
            load_index(path)

    def test_save_is_deterministic(self, tmp_path):
        index = self._small_index()
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        save_index(index, a)
        save_index(index, b)
        assert a.read_bytes() == b.read_bytes()


class TestConcurrentSearch:
    def test_parallel_queries_match_serial(self):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(77)
        index = Index(random_entries(rng, 300, 32))
        queries = [unit_vector(rng.standard_normal(32), 32, "rand") for _ in range(40)]
        serial = [[h.entry.unit_id for h in index.search(q, k=5)] for q in queries]
        with ThreadPoolExecutor(max_workers=8) as pool:
            parallel = list(pool.map(lambda q: [h.entry.unit_id for h in index.search(q, k=5)], queries))
        assert serial == parallel


class TestSearchOracleProperty:
    def test_random_corpora_match_full_sort(self):
        rng = np.random.default_rng(2024)
        for trial in range(20):
            n = int(rng.choice([10, 50, 200]))
            dim = int(rng.choice([8, 16, 64]))
            index = Index(random_entries(rng, n, dim))
            query = unit_vector(rng.standard_normal(dim), dim, "rand")
            got = [h.entry.unit_id for h in index.search(query, k=10)]
            assert got == brute_force_ids(index, query, 10), f"trial {trial}"
