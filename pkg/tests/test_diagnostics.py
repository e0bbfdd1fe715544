"""Chunk-length study tests: pairwise buckets, KDE, bimodality, keyword probes."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from ragkit.diagnostics import (
    KdeCurve,
    LengthBucket,
    bucket_for,
    chunk_length_study,
    detect_bimodality,
    emit_distribution_data,
    kde,
    keyword_position_profile,
    pairwise_similarities,
    silverman_bandwidth,
)
from ragkit.errors import DegenerateDistribution, InsufficientData, ProbeInvalid
from ragkit.index import Index, UnitKind

from test_index import random_entries

FIXTURES = Path(__file__).parent / "fixtures"


def gaussian_kde_oracle(samples, x, h):
    """Direct double-loop summation, no vectorization."""
    total = 0.0
    for s in samples:
        z = (x - s) / h
        total += math.exp(-0.5 * z * z)
    return total / (len(samples) * h * math.sqrt(2.0 * math.pi))


class TestBuckets:
    def test_partition_rule(self):
        assert bucket_for(10, 10, 200) is LengthBucket.BOTH_SHORT
        assert bucket_for(10, 201, 200) is LengthBucket.MIXED
        assert bucket_for(201, 10, 200) is LengthBucket.MIXED
        assert bucket_for(201, 300, 200) is LengthBucket.BOTH_LONG
        assert bucket_for(200, 200, 200) is LengthBucket.BOTH_SHORT  # boundary is strict

    def test_three_entries_three_samples(self):
        rng = np.random.default_rng(0)
        index = Index(random_entries(rng, 3, 8, n_paragraphs=1))
        samples = pairwise_similarities(index, {UnitKind.SENTENCE}, 200)
        assert len(samples) == 3

    def test_pair_count_is_n_choose_2(self):
        rng = np.random.default_rng(1)
        index = Index(random_entries(rng, 40, 8, n_paragraphs=2))
        samples = pairwise_similarities(index, {UnitKind.SENTENCE}, 200)
        assert len(samples) == 40 * 39 // 2

    def test_ids_ordered_within_pair(self):
        rng = np.random.default_rng(2)
        index = Index(random_entries(rng, 12, 8, n_paragraphs=2))
        for sample in pairwise_similarities(index, {UnitKind.SENTENCE}, 200):
            assert sample.id_a < sample.id_b

    def test_bucket_counts_match_direct_enumeration(self):
        rng = np.random.default_rng(3)
        index = Index(random_entries(rng, 100, 8, n_paragraphs=5))
        samples = pairwise_similarities(index, {UnitKind.SENTENCE}, 150)
        entries = sorted(
            (e for e in index.entries if e.kind is UnitKind.SENTENCE), key=lambda e: e.unit_id
        )
        expected = {bucket: 0 for bucket in LengthBucket}
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                expected[bucket_for(entries[i].word_count, entries[j].word_count, 150)] += 1
        got = {bucket: 0 for bucket in LengthBucket}
        for sample in samples:
            got[sample.bucket] += 1
        assert got == expected
        assert sum(got.values()) == len(entries) * (len(entries) - 1) // 2

    def test_insufficient_entries(self):
        rng = np.random.default_rng(4)
        index = Index(random_entries(rng, 1, 8, n_paragraphs=1))
        with pytest.raises(InsufficientData):
            pairwise_similarities(index, {UnitKind.SENTENCE}, 200)


class TestKde:
    def test_degenerate_on_equal_samples(self):
        with pytest.raises(DegenerateDistribution) as excinfo:
            kde([0.5] * 10)
        assert excinfo.value.value == 0.5
        assert excinfo.value.n_samples == 10

    def test_symmetric_samples_symmetric_curve(self):
        curve = kde([-0.4, 0.4], grid_size=201)
        assert np.allclose(curve.density, curve.density[::-1], atol=1e-9)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(7)
        samples = rng.uniform(-0.8, 0.8, size=500)
        curve = kde(samples, grid_size=256)
        pick = rng.integers(0, 256, size=10)
        for i in pick:
            expected = gaussian_kde_oracle(samples, curve.grid[i], curve.bandwidth)
            assert curve.density[i] == pytest.approx(expected, abs=1e-9)

    def test_density_nonnegative_and_integral_near_one(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            samples = rng.normal(0.1, 0.2, size=400)
            curve = kde(samples)
            assert np.all(curve.density >= 0)
            integral = np.trapezoid(curve.density, curve.grid)
            assert integral == pytest.approx(1.0, abs=1e-3)

    def test_silverman_formula(self):
        rng = np.random.default_rng(9)
        samples = rng.normal(size=300)
        sd = float(np.std(samples))
        q75, q25 = np.percentile(samples, [75, 25])
        expected = 0.9 * min(sd, (q75 - q25) / 1.34) * 300 ** (-0.2)
        assert silverman_bandwidth(samples) == pytest.approx(expected, rel=1e-12)

    def test_silverman_zero_iqr_falls_back_to_sd(self):
        samples = np.array([0.0] * 40 + [1.0] * 5)  # IQR 0, sd > 0
        h = silverman_bandwidth(samples)
        assert h == pytest.approx(0.9 * float(np.std(samples)) * 45 ** (-0.2), rel=1e-12)

    def test_grid_spans_three_bandwidths(self):
        samples = np.random.default_rng(10).normal(size=200)
        curve = kde(samples, grid_size=128)
        assert curve.grid[0] == pytest.approx(samples.min() - 3 * curve.bandwidth)
        assert curve.grid[-1] == pytest.approx(samples.max() + 3 * curve.bandwidth)
        assert len(curve.grid) == 128

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientData):
            kde([0.3])


class TestBimodality:
    def test_single_gaussian_not_bimodal_many_seeds(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            for n in (100, 400):
                curve = kde(rng.normal(0.2, 0.1, size=n))
                assert not detect_bimodality(curve).is_bimodal, f"seed {seed} n {n}"

    def test_separated_mixture_is_bimodal(self):
        rng = np.random.default_rng(123)
        samples = np.concatenate(
            [rng.normal(-0.5, 0.05, size=400), rng.normal(0.5, 0.05, size=400)]
        )
        verdict = detect_bimodality(kde(samples))
        assert verdict.is_bimodal
        assert len(verdict.modes) >= 2
        assert verdict.valley is not None
        xs = [m[0] for m in verdict.modes]
        assert min(xs) < verdict.valley[0] < max(xs)

    def test_valley_ratio_gates_verdict(self):
        rng = np.random.default_rng(5)
        samples = np.concatenate(
            [rng.normal(-0.5, 0.05, size=400), rng.normal(0.5, 0.05, size=400)]
        )
        curve = kde(samples)
        assert detect_bimodality(curve, valley_ratio=0.8).is_bimodal
        assert not detect_bimodality(curve, valley_ratio=1e-9).is_bimodal


class TestKeywordProfile:
    def test_first_token_position_zero(self, fixture_index, fixture_embedder):
        probes = [("lefebo", "manual/p0/s0")]
        [result] = keyword_position_profile(fixture_index, fixture_embedder, probes, k=3)
        assert result.normalized_position == 0.0

    def test_absent_keyword_invalid(self, fixture_index, fixture_embedder):
        with pytest.raises(ProbeInvalid) as excinfo:
            keyword_position_profile(fixture_index, fixture_embedder, [("zzzz", "manual/p0/s0")], 3)
        assert excinfo.value.probe_index == 0

    def test_probe_fixture_matches_frozen_results(self, fixture_index, fixture_embedder):
        probes = [
            json.loads(line)
            for line in (FIXTURES / "probes.jsonl").read_text().splitlines()
            if line.strip()
        ]
        expected = json.loads((FIXTURES / "expected" / "probe_results.json").read_text())
        results = keyword_position_profile(
            fixture_index,
            fixture_embedder,
            [(p["keyword"], p["gold_sentence_id"]) for p in probes],
            k=3,
        )
        assert len(results) == 25
        for got, want in zip(results, expected):
            assert got.hit == want["hit"]
            assert got.normalized_position == pytest.approx(want["normalized_position"])

    def test_early_hit_rate_exceeds_late(self, fixture_index, fixture_embedder):
        probes = [
            json.loads(line)
            for line in (FIXTURES / "probes.jsonl").read_text().splitlines()
            if line.strip()
        ]
        results = keyword_position_profile(
            fixture_index,
            fixture_embedder,
            [(p["keyword"], p["gold_sentence_id"]) for p in probes],
            k=3,
        )
        early = [r.hit for r in results if r.normalized_position < 0.5]
        late = [r.hit for r in results if r.normalized_position >= 0.5]
        assert sum(early) / len(early) >= sum(late) / len(late)
        assert sum(early) == 13 and sum(late) == 2  # frozen from the oracle run


class TestStudyAndEmission:
    def _study_index(self):
        # Three word-count classes around a threshold of 50.
        rng = np.random.default_rng(21)
        entries = random_entries(rng, 60, 16, n_paragraphs=3)
        return Index(entries)

    def test_emission_rows_and_sidecar(self, tmp_path):
        index = self._study_index()
        study = chunk_length_study(index, {UnitKind.SENTENCE}, threshold_words=150, grid_size=64)
        csv_path = tmp_path / "dist.csv"
        sidecar = emit_distribution_data(study, csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "bucket,x,density"
        buckets_present = {line.split(",")[0] for line in lines[1:]}
        curves = {
            bucket.value
            for bucket, entry in study.items()
            if isinstance(entry.curve, KdeCurve)
        }
        assert buckets_present == curves
        meta = json.loads(Path(sidecar).read_text())
        for name, info in meta["buckets"].items():
            assert info["n_pairs"] >= 0
            if "bandwidth" in info:
                assert info["is_bimodal"] in (True, False)

    def test_one_curve_rows_equal_grid_size(self, tmp_path):
        curve = kde([0.1, 0.2, 0.35, 0.5], grid_size=3)
        from ragkit.diagnostics import BucketStudy

        study = {LengthBucket.BOTH_SHORT: BucketStudy(6, 0.29, curve, detect_bimodality(curve))}
        csv_path = tmp_path / "one.csv"
        emit_distribution_data(study, csv_path)
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 1 + 3

    def test_emission_deterministic(self, tmp_path):
        index = self._study_index()
        study = chunk_length_study(index, {UnitKind.SENTENCE}, threshold_words=150, grid_size=64)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_distribution_data(study, a)
        emit_distribution_data(study, b)
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_bucket_pair_counts_partition_total(self):
        index = self._study_index()
        study = chunk_length_study(index, {UnitKind.SENTENCE}, threshold_words=150, grid_size=64)
        n = sum(1 for e in index.entries if e.kind is UnitKind.SENTENCE)
        assert sum(entry.n_pairs for entry in study.values()) == n * (n - 1) // 2
