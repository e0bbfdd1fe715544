"""Gold-annotated query sets, strategy metrics, and hypothesis reports.

Reports tally per-query support in the "N of M queries" form. Everything is
a deterministic fold in query_id order so repeated runs emit identical files.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus
from .diagnostics import ProbeResult, keyword_position_profile
from .embedding import EmbeddingProvider
from .errors import CoverageError, MissingData, ValidationError
from .generation import (
    ChatProvider,
    EchoChatProvider,
    GenerationRecord,
    PermutationRun,
    acronym_expansion_flag,
    build_prompt,
    generate,
    permutation_experiment,
)
from .index import Index, IndexEntry, UnitKind
from .retrieval import RetrievalResult, StrategyKind, run_strategy

HYPOTHESIS_IDS = ("H1", "H2", "H3", "H4", "H5", "H6", "H7")

# Observation column of the report table, one line per hypothesis.
OBSERVATIONS = {
    "H1": "Merging term and definition searches by rank matched or beat combined-text retrieval",
    "H2": "Similarity scores ranked modes inconsistently with gold ranks; selection stays rank-based",
    "H3": "Keywords near the start of their sentence were retrieved; late keywords were missed",
    "H4": "Sentence search deduplicated to parent paragraphs matched or beat direct paragraph search",
    "H5": "Generation grounded by sentence-to-paragraph contexts answered at least as many queries",
    "H6": "Generated answers for acronym entries merely restated the abbreviation and expansion",
    "H7": "Context order left generated responses unchanged (similarity to identity order)",
}

# Keyword probes count as conforming when an early keyword hits or a late
# keyword misses; "early" means the first half of the sentence.
EARLY_POSITION_BOUNDARY = 0.5


@dataclass(frozen=True)
class EvalQuery:
    query_id: str
    text: str
    gold_unit_ids: frozenset[str]
    tags: frozenset[str] = frozenset()
    keyword: str | None = None
    hypothesis_ids: frozenset[str] = frozenset()


@dataclass(frozen=True)
class EvalOutcome:
    query_id: str
    strategy: StrategyKind
    k: int
    hit_at_k: bool
    gold_rank: int | None
    reciprocal_rank: float
    scores_of_top_k: tuple[float, ...]


@dataclass(frozen=True)
class GenerationOutcome:
    """One generation run scored offline for a query and strategy."""

    query_id: str
    strategy: StrategyKind
    response: str
    gold_contained: bool
    acronym_parrot: bool | None = None


@dataclass(frozen=True)
class StrategyComparison:
    a_wins: int
    b_wins: int
    ties: int
    applicable: int
    support_fraction: float


@dataclass(frozen=True)
class HypothesisReport:
    hypothesis_id: str
    observation: str
    supported_count: int
    applicable_count: int
    support_label: str
    rows: tuple[dict, ...]


@dataclass(frozen=True)
class HarnessResult:
    outcomes: tuple[EvalOutcome, ...]
    generation_outcomes: tuple[GenerationOutcome, ...]
    generation_records: tuple[GenerationRecord, ...]
    keyword_profile: tuple[tuple[str, ProbeResult], ...]
    permutation_runs: tuple[tuple[str, tuple[PermutationRun, ...]], ...]
    reports: tuple[HypothesisReport, ...]
    k: int


def load_query_set(path: str | Path, known_unit_ids: set[str] | None = None) -> list[EvalQuery]:
    """Parse a JSON-Lines query file; one query object per line.

    When ``known_unit_ids`` is given, every gold ID must resolve into it;
    all unresolved IDs are reported together in one ValidationError.
    """
    queries: list[EvalQuery] = []
    problems: list[str] = []
    unresolved: list[str] = []
    seen_ids: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {line_no + 1}: invalid JSON ({exc})")
            continue
        query_id = record.get("query_id")
        query_text = record.get("text")
        gold = record.get("gold_unit_ids")
        hypotheses = record.get("hypothesis_ids")
        if not query_id or not query_text or not gold or not hypotheses:
            problems.append(f"line {line_no + 1}: missing required fields")
            continue
        if query_id in seen_ids:
            problems.append(f"line {line_no + 1}: duplicate query_id {query_id!r}")
            continue
        seen_ids.add(query_id)
        bad_hypotheses = [h for h in hypotheses if h not in HYPOTHESIS_IDS]
        if bad_hypotheses:
            problems.append(f"line {line_no + 1}: unknown hypothesis ids {bad_hypotheses}")
            continue
        if known_unit_ids is not None:
            for gold_id in gold:
                if gold_id not in known_unit_ids:
                    unresolved.append(f"{query_id}: {gold_id}")
        queries.append(
            EvalQuery(
                query_id=query_id,
                text=query_text,
                gold_unit_ids=frozenset(gold),
                tags=frozenset(record.get("tags", [])),
                keyword=record.get("keyword"),
                hypothesis_ids=frozenset(hypotheses),
            )
        )
    if problems or unresolved:
        raise ValidationError(
            "query set failed validation: " + "; ".join(problems + unresolved),
            offenders=tuple(problems + unresolved),
        )
    return queries


def matches_gold(entry: IndexEntry, gold_unit_ids: frozenset[str]) -> bool:
    """A hit matches gold by its own ID, its glossary/document ID, or its parent."""
    if entry.unit_id in gold_unit_ids:
        return True
    if entry.kind in (UnitKind.TERM, UnitKind.DEFINITION, UnitKind.COMBINED):
        if entry.doc_or_entry_id in gold_unit_ids:
            return True
    return entry.parent_para_id is not None and entry.parent_para_id in gold_unit_ids


def outcome_from_result(query: EvalQuery, result: RetrievalResult, k: int) -> EvalOutcome:
    gold_rank = None
    for hit in result.hits:
        if matches_gold(hit.entry, query.gold_unit_ids):
            gold_rank = hit.rank
            break
    return EvalOutcome(
        query_id=query.query_id,
        strategy=result.strategy,
        k=k,
        hit_at_k=gold_rank is not None,
        gold_rank=gold_rank,
        reciprocal_rank=1.0 / gold_rank if gold_rank else 0.0,
        scores_of_top_k=tuple(h.score for h in result.hits),
    )


def run_eval(
    index: Index,
    provider: EmbeddingProvider,
    queries: Sequence[EvalQuery],
    strategies: Sequence[StrategyKind],
    k: int = 3,
) -> list[EvalOutcome]:
    """Evaluate every query under every strategy; |queries| x |strategies| outcomes."""
    outcomes = []
    for query in queries:
        for strategy in strategies:
            try:
                result = run_strategy(index, provider, strategy, query.text, k)
            except Exception as exc:
                raise type(exc)(f"query {query.query_id!r}: {exc}") from exc
            outcomes.append(outcome_from_result(query, result, k))
    return outcomes


def _beats(a: EvalOutcome, b: EvalOutcome) -> int:
    """1 when a wins on (hit_at_k, then gold_rank), -1 when b wins, 0 on a tie."""
    if a.hit_at_k != b.hit_at_k:
        return 1 if a.hit_at_k else -1
    if a.hit_at_k and a.gold_rank != b.gold_rank:
        return 1 if a.gold_rank < b.gold_rank else -1
    return 0


def _by_query(outcomes: Iterable[EvalOutcome], strategy: StrategyKind) -> dict[str, EvalOutcome]:
    return {o.query_id: o for o in outcomes if o.strategy is strategy}


def compare_strategies(
    outcomes: Sequence[EvalOutcome],
    a: StrategyKind,
    b: StrategyKind,
) -> StrategyComparison:
    """Per-query wins for strategy a over b on the queries both covered."""
    a_map = _by_query(outcomes, a)
    b_map = _by_query(outcomes, b)
    common = sorted(set(a_map) & set(b_map))
    if not common:
        raise CoverageError(f"strategies {a.value} and {b.value} share no queries")
    a_wins = b_wins = ties = 0
    for query_id in common:
        verdict = _beats(a_map[query_id], b_map[query_id])
        if verdict > 0:
            a_wins += 1
        elif verdict < 0:
            b_wins += 1
        else:
            ties += 1
    return StrategyComparison(
        a_wins=a_wins,
        b_wins=b_wins,
        ties=ties,
        applicable=len(common),
        support_fraction=(a_wins + ties) / len(common),
    )


def _tagged(queries: Sequence[EvalQuery], hypothesis_id: str) -> list[EvalQuery]:
    return sorted(
        (q for q in queries if hypothesis_id in q.hypothesis_ids), key=lambda q: q.query_id
    )


def _comparison_report(
    hypothesis_id: str,
    queries: Sequence[EvalQuery],
    outcomes: Sequence[EvalOutcome],
    better: StrategyKind,
    baseline: StrategyKind,
) -> HypothesisReport:
    applicable = _tagged(queries, hypothesis_id)
    better_map = _by_query(outcomes, better)
    baseline_map = _by_query(outcomes, baseline)
    rows = []
    supported = 0
    for query in applicable:
        if query.query_id not in better_map or query.query_id not in baseline_map:
            raise MissingData(
                f"{hypothesis_id}: no {better.value}/{baseline.value} outcomes "
                f"for query {query.query_id!r}"
            )
        a, b = better_map[query.query_id], baseline_map[query.query_id]
        wins = _beats(a, b) >= 0
        supported += wins
        rows.append(
            {
                "query_id": query.query_id,
                "supported": wins,
                f"{better.value}_rank": a.gold_rank,
                f"{baseline.value}_rank": b.gold_rank,
            }
        )
    return _make_report(hypothesis_id, supported, len(applicable), rows)


def _score_consistency_report(
    queries: Sequence[EvalQuery],
    outcomes: Sequence[EvalOutcome],
) -> HypothesisReport:
    """Flag queries whose cross-mode scores would mislead a thresholding caller.

    A query is flagged when some mode finds the gold at a better rank than
    another mode yet reports a lower gold score, so comparing raw scores
    across modes would prefer the worse mode.
    """
    applicable = _tagged(queries, "H2")
    modes = (
        StrategyKind.GLOSSARY_TERM,
        StrategyKind.GLOSSARY_DEFINITION,
        StrategyKind.GLOSSARY_COMBINED,
    )
    maps = {mode: _by_query(outcomes, mode) for mode in modes}
    rows = []
    flagged_count = 0
    for query in applicable:
        found: list[tuple[int, float, str]] = []
        spreads = {}
        for mode in modes:
            outcome = maps[mode].get(query.query_id)
            if outcome is None:
                raise MissingData(f"H2: no {mode.value} outcome for query {query.query_id!r}")
            if outcome.scores_of_top_k:
                spreads[mode.value] = [
                    round(min(outcome.scores_of_top_k), 6),
                    round(max(outcome.scores_of_top_k), 6),
                ]
            if outcome.gold_rank is not None:
                found.append(
                    (outcome.gold_rank, outcome.scores_of_top_k[outcome.gold_rank - 1], mode.value)
                )
        flagged = any(
            rank_a < rank_b and score_a < score_b
            for rank_a, score_a, _ in found
            for rank_b, score_b, _ in found
        )
        flagged_count += flagged
        rows.append(
            {
                "query_id": query.query_id,
                "supported": flagged,
                "gold_rank_and_score_by_mode": [
                    [mode, rank, round(score, 6)] for rank, score, mode in found
                ],
                "top_k_score_spread_by_mode": spreads,
            }
        )
    return _make_report("H2", flagged_count, len(applicable), rows)


def _keyword_report(
    queries: Sequence[EvalQuery],
    keyword_profile: Sequence[tuple[str, ProbeResult]],
) -> HypothesisReport:
    applicable = _tagged(queries, "H3")
    profile_map = {query_id: probe for query_id, probe in keyword_profile}
    rows = []
    supported = 0
    for query in applicable:
        probe = profile_map.get(query.query_id)
        if probe is None:
            raise MissingData(f"H3: no keyword probe result for query {query.query_id!r}")
        early = probe.normalized_position < EARLY_POSITION_BOUNDARY
        conforms = probe.hit == early
        supported += conforms
        rows.append(
            {
                "query_id": query.query_id,
                "supported": conforms,
                "normalized_position": round(probe.normalized_position, 6),
                "hit": probe.hit,
            }
        )
    return _make_report("H3", supported, len(applicable), rows)


def _generation_comparison_report(
    queries: Sequence[EvalQuery],
    generation_outcomes: Sequence[GenerationOutcome],
) -> HypothesisReport:
    applicable = _tagged(queries, "H5")
    s2p = {
        g.query_id: g
        for g in generation_outcomes
        if g.strategy is StrategyKind.SENTENCE_TO_PARAGRAPH
    }
    direct = {
        g.query_id: g for g in generation_outcomes if g.strategy is StrategyKind.PARAGRAPH_DIRECT
    }
    rows = []
    supported = 0
    for query in applicable:
        if query.query_id not in s2p or query.query_id not in direct:
            raise MissingData(f"H5: no generation runs for query {query.query_id!r}")
        a, b = s2p[query.query_id], direct[query.query_id]
        wins = a.gold_contained >= b.gold_contained
        supported += wins
        rows.append(
            {
                "query_id": query.query_id,
                "supported": wins,
                "sentence_to_paragraph_hit": a.gold_contained,
                "paragraph_direct_hit": b.gold_contained,
            }
        )
    return _make_report("H5", supported, len(applicable), rows)


def _acronym_report(
    queries: Sequence[EvalQuery],
    generation_outcomes: Sequence[GenerationOutcome],
) -> HypothesisReport:
    applicable = _tagged(queries, "H6")
    flags = {g.query_id: g for g in generation_outcomes if g.acronym_parrot is not None}
    rows = []
    supported = 0
    for query in applicable:
        outcome = flags.get(query.query_id)
        if outcome is None:
            raise MissingData(f"H6: no acronym-flagged generation for query {query.query_id!r}")
        supported += outcome.acronym_parrot
        rows.append(
            {
                "query_id": query.query_id,
                "supported": outcome.acronym_parrot,
                "response": outcome.response,
            }
        )
    return _make_report("H6", supported, len(applicable), rows)


def _permutation_report(
    queries: Sequence[EvalQuery],
    permutation_runs: Sequence[tuple[str, tuple[PermutationRun, ...]]],
) -> HypothesisReport:
    applicable = _tagged(queries, "H7")
    run_map = dict(permutation_runs)
    rows = []
    for query in applicable:
        runs = run_map.get(query.query_id)
        if not runs:
            raise MissingData(f"H7: no permutation runs for query {query.query_id!r}")
        similarities = [r.similarity_to_first for r in runs]
        rows.append(
            {
                "query_id": query.query_id,
                "permutations": len(runs),
                "min_similarity": round(min(similarities), 6),
                "mean_similarity": round(sum(similarities) / len(similarities), 6),
                "exact_match_fraction": round(
                    sum(r.exact_match for r in runs) / len(runs), 6
                ),
            }
        )
    # H7 reports similarities without a supported/total tally.
    return HypothesisReport(
        hypothesis_id="H7",
        observation=OBSERVATIONS["H7"],
        supported_count=0,
        applicable_count=len(applicable),
        support_label="NA",
        rows=tuple(rows),
    )


def _make_report(hypothesis_id: str, supported: int, applicable: int, rows: list[dict]) -> HypothesisReport:
    return HypothesisReport(
        hypothesis_id=hypothesis_id,
        observation=OBSERVATIONS[hypothesis_id],
        supported_count=supported,
        applicable_count=applicable,
        support_label=f"{supported} of {applicable} queries",
        rows=tuple(rows),
    )


def hypothesis_report(
    outcomes: Sequence[EvalOutcome],
    generation_outcomes: Sequence[GenerationOutcome],
    hypothesis_id: str,
    *,
    queries: Sequence[EvalQuery],
    keyword_profile: Sequence[tuple[str, ProbeResult]] = (),
    permutation_runs: Sequence[tuple[str, tuple[PermutationRun, ...]]] = (),
) -> HypothesisReport:
    """Build the report for one hypothesis from the runs that feed it."""
    if hypothesis_id == "H1":
        return _comparison_report(
            "H1", queries, outcomes, StrategyKind.GLOSSARY_BEST, StrategyKind.GLOSSARY_COMBINED
        )
    if hypothesis_id == "H2":
        return _score_consistency_report(queries, outcomes)
    if hypothesis_id == "H3":
        return _keyword_report(queries, keyword_profile)
    if hypothesis_id == "H4":
        return _comparison_report(
            "H4", queries, outcomes, StrategyKind.SENTENCE_TO_PARAGRAPH, StrategyKind.PARAGRAPH_DIRECT
        )
    if hypothesis_id == "H5":
        return _generation_comparison_report(queries, generation_outcomes)
    if hypothesis_id == "H6":
        return _acronym_report(queries, generation_outcomes)
    if hypothesis_id == "H7":
        return _permutation_report(queries, permutation_runs)
    raise ValueError(f"unknown hypothesis {hypothesis_id!r}")


def _normalize_for_containment(text: str) -> str:
    return re.sub(r"\s+", " ", text.casefold()).strip()


def gold_contained(response: str, gold_texts: Iterable[str]) -> bool:
    """Offline generation correctness: case-folded, whitespace-normalized
    containment of any gold text in the response. A proxy, flagged as such
    in emitted reports."""
    normalized = _normalize_for_containment(response)
    return any(
        _normalize_for_containment(gold) in normalized for gold in gold_texts if gold.strip()
    )


def run_harness(
    corpus: Corpus,
    index: Index,
    provider: EmbeddingProvider,
    chat: ChatProvider,
    queries: Sequence[EvalQuery],
    k: int = 3,
    strategies: Sequence[StrategyKind] | None = None,
    permutation_chat: ChatProvider | None = None,
    max_permutations: int = 24,
) -> HarnessResult:
    """Run retrieval, generation, keyword, and permutation passes, then build
    every hypothesis report the query set asks for.

    ``strategies`` limits the retrieval pass (default: all); a report whose
    prerequisite strategy was excluded raises MissingData.
    ``permutation_chat`` defaults to the order-invariant echo stub so the
    order experiment isolates context order from provider drift.
    """
    queries = sorted(queries, key=lambda q: q.query_id)
    outcomes = run_eval(index, provider, queries, list(strategies or StrategyKind), k)

    generation_outcomes: list[GenerationOutcome] = []
    generation_records: list[GenerationRecord] = []

    for query in queries:
        if "H5" in query.hypothesis_ids:
            gold_texts = [corpus.unit_text(g) for g in sorted(query.gold_unit_ids)]
            for strategy in (StrategyKind.SENTENCE_TO_PARAGRAPH, StrategyKind.PARAGRAPH_DIRECT):
                result = run_strategy(index, provider, strategy, query.text, k)
                if not result.hits:
                    generation_outcomes.append(
                        GenerationOutcome(query.query_id, strategy, "", False)
                    )
                    continue
                prompt = build_prompt(result.context_texts, query.text)
                record = generate(chat, prompt, [h.entry.unit_id for h in result.hits])
                generation_records.append(record)
                generation_outcomes.append(
                    GenerationOutcome(
                        query_id=query.query_id,
                        strategy=strategy,
                        response=record.response,
                        gold_contained=gold_contained(record.response, gold_texts),
                    )
                )
        if "H6" in query.hypothesis_ids:
            entry = corpus.glossary_entry(sorted(query.gold_unit_ids)[0])
            result = run_strategy(index, provider, StrategyKind.GLOSSARY_BEST, query.text, k)
            prompt = build_prompt(result.context_texts, query.text)
            record = generate(chat, prompt, [h.entry.unit_id for h in result.hits])
            generation_records.append(record)
            generation_outcomes.append(
                GenerationOutcome(
                    query_id=query.query_id,
                    strategy=StrategyKind.GLOSSARY_BEST,
                    response=record.response,
                    gold_contained=gold_contained(
                        record.response, [corpus.unit_text(g) for g in query.gold_unit_ids]
                    ),
                    acronym_parrot=acronym_expansion_flag(record.response, entry),
                )
            )

    keyword_profile: list[tuple[str, ProbeResult]] = []
    probe_queries = [q for q in queries if "H3" in q.hypothesis_ids and q.keyword]
    if probe_queries:
        probes = []
        for query in probe_queries:
            sentence_ids = sorted(
                g for g in query.gold_unit_ids if g in index and index.get(g).kind is UnitKind.SENTENCE
            )
            if not sentence_ids:
                raise MissingData(f"H3 query {query.query_id!r} has no sentence gold id")
            probes.append((query.keyword, sentence_ids[0]))
        results = keyword_position_profile(index, provider, probes, k)
        keyword_profile = [(q.query_id, r) for q, r in zip(probe_queries, results)]

    permutation_runs: list[tuple[str, tuple[PermutationRun, ...]]] = []
    order_chat = permutation_chat or EchoChatProvider(order_invariant=True)
    for query in queries:
        if "H7" not in query.hypothesis_ids:
            continue
        result = run_strategy(index, provider, StrategyKind.SENTENCE_TO_PARAGRAPH, query.text, k)
        runs = permutation_experiment(
            order_chat, provider, list(result.context_texts), query.text, max_permutations
        )
        permutation_runs.append((query.query_id, tuple(runs)))

    present = sorted({h for q in queries for h in q.hypothesis_ids})
    reports = tuple(
        hypothesis_report(
            outcomes,
            generation_outcomes,
            hypothesis_id,
            queries=queries,
            keyword_profile=keyword_profile,
            permutation_runs=permutation_runs,
        )
        for hypothesis_id in present
    )
    return HarnessResult(
        outcomes=tuple(outcomes),
        generation_outcomes=tuple(generation_outcomes),
        generation_records=tuple(generation_records),
        keyword_profile=tuple(keyword_profile),
        permutation_runs=tuple(permutation_runs),
        reports=reports,
        k=k,
    )


def render_markdown(reports: Sequence[HypothesisReport], k: int) -> str:
    lines = [
        "# Hypothesis evaluation report",
        "",
        f"k = {k}",
        "",
        "| Hypothesis | Observation | Support |",
        "| --- | --- | --- |",
    ]
    for report in reports:
        lines.append(
            f"| {report.hypothesis_id} | {report.observation} | {report.support_label} |"
        )
    if any(r.hypothesis_id == "H5" for r in reports):
        lines += [
            "",
            "Generation correctness for H5 is a containment proxy: the gold text",
            "must appear, case-folded and whitespace-normalized, in the response.",
        ]
    return "\n".join(lines) + "\n"


def render_csv(reports: Sequence[HypothesisReport], k: int) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["hypothesis", "observation", "supported", "applicable", "support", "k"])
    for report in reports:
        writer.writerow(
            [
                report.hypothesis_id,
                report.observation,
                report.supported_count,
                report.applicable_count,
                report.support_label,
                k,
            ]
        )
    return buffer.getvalue()


def render_json(reports: Sequence[HypothesisReport], k: int) -> str:
    payload = {
        "k": k,
        "reports": [
            {
                "hypothesis_id": report.hypothesis_id,
                "observation": report.observation,
                "supported_count": report.supported_count,
                "applicable_count": report.applicable_count,
                "support": report.support_label,
                "rows": list(report.rows),
            }
            for report in reports
        ],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


_RENDERERS = {"markdown": render_markdown, "csv": render_csv, "json": render_json}


def emit_report(
    reports: Sequence[HypothesisReport],
    path: str | Path,
    format: str = "markdown",
    k: int = 3,
) -> None:
    """Serialize reports deterministically as markdown, CSV, or JSON."""
    if not reports:
        raise ValueError("no reports to emit")
    if format not in _RENDERERS:
        raise ValueError(f"unknown report format {format!r}")
    reports = sorted(reports, key=lambda r: r.hypothesis_id)
    Path(path).write_text(_RENDERERS[format](reports, k), encoding="utf-8")


def reports_from_json(path: str | Path) -> tuple[list[HypothesisReport], int]:
    """Inverse of the JSON renderer, for round-trip checks."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    reports = [
        HypothesisReport(
            hypothesis_id=item["hypothesis_id"],
            observation=item["observation"],
            supported_count=item["supported_count"],
            applicable_count=item["applicable_count"],
            support_label=item["support"],
            rows=tuple(item["rows"]),
        )
        for item in payload["reports"]
    ]
    return reports, payload["k"]
