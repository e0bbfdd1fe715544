"""Chunk-length similarity diagnostics.

All-pairs cosine distributions bucketed by word-count class, Gaussian KDE
with Silverman bandwidth, a valley-based bimodality check, and keyword
position profiling. The whole pipeline is deterministic for a fixed corpus
and provider.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import word_tokens
from .embedding import EmbeddingProvider
from .errors import DegenerateDistribution, InsufficientData, ProbeInvalid
from .index import Index, UnitKind

DEFAULT_THRESHOLD_WORDS = 200
DEFAULT_GRID_SIZE = 512
DEFAULT_VALLEY_RATIO = 0.8
DEFAULT_MIN_MODE_HEIGHT_RATIO = 0.1

# Pairwise scoring walks row blocks of this many entries; memory stays at
# O(block * n) doubles instead of the full n*n matrix.
_PAIR_BLOCK = 256

# KDE evaluation sums sample blocks of this size against the whole grid.
_KDE_BLOCK = 4096


class LengthBucket(Enum):
    BOTH_SHORT = "both-short"
    MIXED = "mixed"
    BOTH_LONG = "both-long"


@dataclass(frozen=True)
class SimilaritySample:
    id_a: str
    id_b: str
    score: float
    bucket: LengthBucket


@dataclass(frozen=True, eq=False)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n_samples: int


@dataclass(frozen=True)
class PointMass:
    """Stand-in for a curve when every sample is identical."""

    value: float
    n_samples: int


@dataclass(frozen=True)
class BimodalityVerdict:
    is_bimodal: bool
    modes: tuple[tuple[float, float], ...]
    valley: tuple[float, float] | None


@dataclass(frozen=True)
class ProbeResult:
    keyword: str
    gold_sentence_id: str
    normalized_position: float
    hit: bool


@dataclass(frozen=True)
class BucketStudy:
    n_pairs: int
    mean: float
    curve: KdeCurve | PointMass | None
    verdict: BimodalityVerdict | None


def bucket_for(count_a: int, count_b: int, threshold_words: int) -> LengthBucket:
    long_a = count_a > threshold_words
    long_b = count_b > threshold_words
    if long_a and long_b:
        return LengthBucket.BOTH_LONG
    if long_a or long_b:
        return LengthBucket.MIXED
    return LengthBucket.BOTH_SHORT


def _study_entries(index: Index, kinds: set[UnitKind]):
    entries = [e for e in index.entries if e.kind in kinds]
    entries.sort(key=lambda e: e.unit_id)
    return entries


def pairwise_similarities(
    index: Index,
    kinds: set[UnitKind],
    threshold_words: int = DEFAULT_THRESHOLD_WORDS,
) -> list[SimilaritySample]:
    """Score every unordered pair of entries of the requested kinds.

    Entries are taken in unit_id order so each pair appears once with
    id_a < id_b; the sample count is n*(n-1)/2.
    """
    entries = _study_entries(index, kinds)
    if len(entries) < 2:
        raise InsufficientData(f"need >= 2 entries of kinds {sorted(k.value for k in kinds)}")
    matrix = np.stack([e.vector.values for e in entries]).astype(np.float64)
    samples: list[SimilaritySample] = []
    n = len(entries)
    for start in range(0, n, _PAIR_BLOCK):
        stop = min(start + _PAIR_BLOCK, n)
        block_scores = matrix[start:stop] @ matrix.T
        for i in range(start, stop):
            row = block_scores[i - start]
            for j in range(i + 1, n):
                score = max(-1.0, min(1.0, float(row[j])))
                samples.append(
                    SimilaritySample(
                        id_a=entries[i].unit_id,
                        id_b=entries[j].unit_id,
                        score=score,
                        bucket=bucket_for(
                            entries[i].word_count, entries[j].word_count, threshold_words
                        ),
                    )
                )
    return samples


def _bucket_score_arrays(
    index: Index,
    kinds: set[UnitKind],
    threshold_words: int,
) -> dict[LengthBucket, np.ndarray]:
    """Per-bucket score arrays without materializing sample objects."""
    entries = _study_entries(index, kinds)
    if len(entries) < 2:
        raise InsufficientData(f"need >= 2 entries of kinds {sorted(k.value for k in kinds)}")
    matrix = np.stack([e.vector.values for e in entries]).astype(np.float64)
    is_long = np.array([e.word_count > threshold_words for e in entries])
    n = len(entries)
    parts: dict[LengthBucket, list[np.ndarray]] = {b: [] for b in LengthBucket}
    for start in range(0, n, _PAIR_BLOCK):
        stop = min(start + _PAIR_BLOCK, n)
        block_scores = np.clip(matrix[start:stop] @ matrix.T, -1.0, 1.0)
        for i in range(start, stop):
            row = block_scores[i - start, i + 1 :]
            if row.size == 0:
                continue
            long_count = is_long[i].astype(int) + is_long[i + 1 :].astype(int)
            parts[LengthBucket.BOTH_SHORT].append(row[long_count == 0])
            parts[LengthBucket.MIXED].append(row[long_count == 1])
            parts[LengthBucket.BOTH_LONG].append(row[long_count == 2])
    return {
        bucket: (np.concatenate(chunks) if chunks else np.empty(0))
        for bucket, chunks in parts.items()
    }


def silverman_bandwidth(samples: np.ndarray) -> float:
    """h = 0.9 * min(sd, IQR/1.34) * n^(-1/5); falls back to sd when IQR is 0."""
    n = samples.size
    sd = float(np.std(samples))
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34)
    if spread == 0.0:
        spread = sd
    return 0.9 * spread * n ** (-1.0 / 5.0)


def kde(samples: Sequence[float] | np.ndarray, grid_size: int = DEFAULT_GRID_SIZE) -> KdeCurve:
    """Gaussian-kernel KDE on a uniform grid over [min-3h, max+3h].

    density(x) = (1 / (n*h)) * sum_i K((x - s_i) / h) with the standard
    normal kernel.
    """
    data = np.asarray(samples, dtype=np.float64)
    if data.size < 2:
        raise InsufficientData(f"need >= 2 samples, got {data.size}")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if float(np.std(data)) == 0.0:
        raise DegenerateDistribution(float(data[0]), int(data.size))
    h = silverman_bandwidth(data)
    grid = np.linspace(data.min() - 3.0 * h, data.max() + 3.0 * h, grid_size)
    density = np.zeros(grid_size, dtype=np.float64)
    inv = 1.0 / (data.size * h * math.sqrt(2.0 * math.pi))
    for start in range(0, data.size, _KDE_BLOCK):
        block = data[start : start + _KDE_BLOCK]
        z = (grid[:, None] - block[None, :]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density *= inv
    grid.setflags(write=False)
    density.setflags(write=False)
    return KdeCurve(grid=grid, density=density, bandwidth=h, n_samples=int(data.size))


def _local_maxima(density: np.ndarray) -> list[int]:
    """Grid points strictly above both neighbors; endpoints above their one neighbor."""
    maxima = []
    last = len(density) - 1
    for i in range(len(density)):
        left_ok = i == 0 or density[i] > density[i - 1]
        right_ok = i == last or density[i] > density[i + 1]
        if left_ok and right_ok:
            maxima.append(i)
    return maxima


def detect_bimodality(
    curve: KdeCurve,
    valley_ratio: float = DEFAULT_VALLEY_RATIO,
    min_mode_height_ratio: float = DEFAULT_MIN_MODE_HEIGHT_RATIO,
) -> BimodalityVerdict:
    """Bimodal iff two modes are separated by a valley whose density falls
    below valley_ratio times the lower of the two peaks.

    A local maximum only counts as a mode when it reaches
    ``min_mode_height_ratio`` of the peak density; sampling ripple from a
    handful of outliers sits well under the default floor while any
    population mode clears it.
    """
    density = np.asarray(curve.density)
    grid = np.asarray(curve.grid)
    floor = min_mode_height_ratio * float(density.max())
    maxima = [i for i in _local_maxima(density) if density[i] >= floor]
    modes = tuple((float(grid[i]), float(density[i])) for i in maxima)
    if len(maxima) < 2:
        return BimodalityVerdict(is_bimodal=False, modes=modes, valley=None)

    best_ratio = math.inf
    best_valley: tuple[float, float] | None = None
    for a_pos in range(len(maxima)):
        for b_pos in range(a_pos + 1, len(maxima)):
            i, j = maxima[a_pos], maxima[b_pos]
            between = density[i : j + 1]
            valley_offset = int(np.argmin(between))
            valley_density = float(between[valley_offset])
            lower_peak = min(float(density[i]), float(density[j]))
            ratio = valley_density / lower_peak if lower_peak > 0 else math.inf
            if ratio < best_ratio:
                best_ratio = ratio
                best_valley = (float(grid[i + valley_offset]), valley_density)
    return BimodalityVerdict(
        is_bimodal=best_ratio < valley_ratio,
        modes=modes,
        valley=best_valley,
    )


def chunk_length_study(
    index: Index,
    kinds: set[UnitKind],
    threshold_words: int = DEFAULT_THRESHOLD_WORDS,
    grid_size: int = DEFAULT_GRID_SIZE,
    valley_ratio: float = DEFAULT_VALLEY_RATIO,
) -> dict[LengthBucket, BucketStudy]:
    """Full study: per-bucket pair counts, means, KDE curves, and verdicts."""
    arrays = _bucket_score_arrays(index, kinds, threshold_words)
    study: dict[LengthBucket, BucketStudy] = {}
    for bucket in LengthBucket:
        scores = arrays[bucket]
        if scores.size == 0:
            study[bucket] = BucketStudy(n_pairs=0, mean=0.0, curve=None, verdict=None)
            continue
        mean = float(scores.mean())
        if scores.size < 2:
            study[bucket] = BucketStudy(n_pairs=int(scores.size), mean=mean, curve=None, verdict=None)
            continue
        try:
            curve = kde(scores, grid_size=grid_size)
        except DegenerateDistribution as exc:
            study[bucket] = BucketStudy(
                n_pairs=int(scores.size),
                mean=mean,
                curve=PointMass(value=exc.value, n_samples=exc.n_samples),
                verdict=None,
            )
            continue
        study[bucket] = BucketStudy(
            n_pairs=int(scores.size),
            mean=mean,
            curve=curve,
            verdict=detect_bimodality(curve, valley_ratio),
        )
    return study


def keyword_position_profile(
    index: Index,
    provider: EmbeddingProvider,
    probes: Sequence[tuple[str, str]],
    k: int = 3,
) -> list[ProbeResult]:
    """For each (keyword, gold_sentence_id) probe, query the sentence index
    with the keyword and record whether the gold sentence lands in the top k.

    normalized_position is the token index of the keyword's first occurrence
    divided by the sentence token count.
    """
    results = []
    for probe_index, (keyword, gold_id) in enumerate(probes):
        if gold_id not in index:
            raise ProbeInvalid(probe_index, f"gold sentence {gold_id!r} is not indexed")
        gold = index.get(gold_id)
        if gold.kind is not UnitKind.SENTENCE:
            raise ProbeInvalid(probe_index, f"gold unit {gold_id!r} is not a sentence")
        sentence_tokens = word_tokens(gold.text)
        keyword_tokens = word_tokens(keyword)
        if not keyword_tokens:
            raise ProbeInvalid(probe_index, "keyword has no tokens")
        position = None
        span = len(keyword_tokens)
        for i in range(len(sentence_tokens) - span + 1):
            if sentence_tokens[i : i + span] == keyword_tokens:
                position = i
                break
        if position is None:
            raise ProbeInvalid(
                probe_index, f"keyword {keyword!r} does not occur in sentence {gold_id!r}"
            )
        hits = index.search(provider.embed(keyword), k, kinds={UnitKind.SENTENCE})
        results.append(
            ProbeResult(
                keyword=keyword,
                gold_sentence_id=gold_id,
                normalized_position=position / len(sentence_tokens),
                hit=any(h.entry.unit_id == gold_id for h in hits),
            )
        )
    return results


def emit_distribution_data(
    study: Mapping[LengthBucket, BucketStudy],
    path: str | Path,
    valley_ratio: float = DEFAULT_VALLEY_RATIO,
) -> Path:
    """Write bucket,x,density CSV rows plus a JSON sidecar with bandwidths,
    pair counts, and bimodality verdicts. Returns the sidecar path."""
    if not study:
        raise ValueError("no buckets to emit")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bucket", "x", "density"])
        for bucket in LengthBucket:
            entry = study.get(bucket)
            if entry is None or not isinstance(entry.curve, KdeCurve):
                continue
            for x, d in zip(entry.curve.grid, entry.curve.density):
                writer.writerow([bucket.value, repr(float(x)), repr(float(d))])

    sidecar: dict[str, dict] = {"valley_ratio": valley_ratio, "buckets": {}}
    for bucket in LengthBucket:
        entry = study.get(bucket)
        if entry is None:
            continue
        info: dict = {"n_pairs": entry.n_pairs, "mean": entry.mean}
        if isinstance(entry.curve, KdeCurve):
            info["bandwidth"] = entry.curve.bandwidth
            info["n_samples"] = entry.curve.n_samples
            if entry.verdict is not None:
                info["is_bimodal"] = entry.verdict.is_bimodal
                info["modes"] = [list(m) for m in entry.verdict.modes]
                info["valley"] = list(entry.verdict.valley) if entry.verdict.valley else None
        elif isinstance(entry.curve, PointMass):
            info["point_mass"] = entry.curve.value
            info["n_samples"] = entry.curve.n_samples
        sidecar["buckets"][bucket.value] = info
    sidecar_path = path.with_suffix(".json") if path.suffix == ".csv" else Path(str(path) + ".json")
    sidecar_path.write_text(json.dumps(sidecar, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return sidecar_path
