"""Command-line interface: ingest, index, query, diagnose-chunks, eval, permute-test."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation
from .config import (
    Config,
    apply_overrides,
    load_config,
    make_chat_provider,
    make_embedding_provider,
)
from .diagnostics import chunk_length_study, emit_distribution_data
from .errors import ProviderUnavailable, RagkitError
from .generation import build_prompt, generate, permutation_experiment
from .index import UnitKind, build_index, corpus_units, load_index, save_index
from .retrieval import StrategyKind, run_strategy

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_PROVIDER = 2


def _emit(payload: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        for line in lines:
            print(line)


def cmd_ingest(args: argparse.Namespace, config: Config) -> int:
    documents = []
    for doc_path in args.doc:
        path = Path(doc_path)
        documents.append(corpus_mod.ingest_document(path.read_bytes(), doc_id=path.stem))
    glossary = []
    if args.glossary:
        glossary = corpus_mod.ingest_glossary(Path(args.glossary).read_bytes())
    corpus = corpus_mod.Corpus(documents=tuple(documents), glossary=tuple(glossary))
    out = args.out or config.paths.corpus
    if not out:
        raise RagkitError("no output path: pass --out or set paths.corpus")
    corpus_mod.save_corpus(corpus, out)
    counts = {
        "documents": len(corpus.documents),
        "paragraphs": sum(1 for _ in corpus.paragraphs()),
        "sentences": sum(1 for _ in corpus.sentences()),
        "glossary_entries": len(corpus.glossary),
    }
    _emit(
        {"out": str(out), **counts},
        args.json,
        [f"{name}: {count}" for name, count in counts.items()] + [f"wrote {out}"],
    )
    return _EXIT_OK


def cmd_index(args: argparse.Namespace, config: Config) -> int:
    corpus = corpus_mod.load_corpus(args.corpus or config.paths.corpus)
    provider = make_embedding_provider(config)
    index = build_index(corpus_units(corpus), provider)
    out = args.out or config.paths.index
    if not out:
        raise RagkitError("no output path: pass --out or set paths.index")
    save_index(index, out)
    _emit(
        {"out": str(out), "entries": len(index), "dim": index.dim, "provider": index.provider_id},
        args.json,
        [f"indexed {len(index)} units (dim {index.dim}, provider {index.provider_id})", f"wrote {out}"],
    )
    return _EXIT_OK


def _check_dim(config: Config, index) -> None:
    if config.embedding.dim != index.dim:
        raise RagkitError(
            f"config dim {config.embedding.dim} != index dim {index.dim}; "
            "point the config at the provider that built this index"
        )


def cmd_query(args: argparse.Namespace, config: Config) -> int:
    index = load_index(args.index or config.paths.index)
    _check_dim(config, index)
    provider = make_embedding_provider(config)
    strategy = StrategyKind(args.strategy)
    k = config.defaults.k if args.k is None else args.k
    result = run_strategy(index, provider, strategy, args.query, k)

    payload: dict = {
        "strategy": strategy.value,
        "query": args.query,
        "hits": [
            {
                "rank": h.rank,
                "unit_id": h.entry.unit_id,
                "kind": h.entry.kind.value,
                "score": round(h.score, 6),
            }
            for h in result.hits
        ],
    }
    lines = [
        f"{h.rank:>2}. {h.entry.unit_id}  score={h.score:.4f}  [{h.entry.kind.value}]"
        for h in result.hits
    ] or ["no results"]
    if args.show_prompt and result.context_texts:
        prompt = build_prompt(result.context_texts, args.query)
        payload["prompt"] = {"system": prompt.system, "user": prompt.user}
        lines += ["", "system: " + prompt.system, "user: " + prompt.user]
    if args.generate and result.context_texts:
        chat = make_chat_provider(config)
        record = generate(chat, build_prompt(result.context_texts, args.query))
        payload["response"] = record.response
        payload["model"] = record.model_id
        lines += ["", f"response ({record.model_id}): {record.response}"]
    _emit(payload, args.json, lines)
    return _EXIT_OK


def cmd_diagnose(args: argparse.Namespace, config: Config) -> int:
    index = load_index(args.index or config.paths.index)
    kinds = {UnitKind(kind.strip()) for kind in args.kinds.split(",") if kind.strip()}
    threshold = config.defaults.threshold_words if args.threshold is None else args.threshold
    grid_size = config.defaults.grid_size if args.grid_size is None else args.grid_size
    valley_ratio = config.defaults.valley_ratio if args.valley_ratio is None else args.valley_ratio
    study = chunk_length_study(index, kinds, threshold, grid_size, valley_ratio)
    sidecar = emit_distribution_data(study, args.out, valley_ratio)
    summary = {
        bucket.value: {
            "pairs": entry.n_pairs,
            "mean": round(entry.mean, 6),
            "bimodal": entry.verdict.is_bimodal if entry.verdict else None,
        }
        for bucket, entry in study.items()
    }
    _emit(
        {"out": str(args.out), "sidecar": str(sidecar), "buckets": summary},
        args.json,
        [
            f"{name}: pairs={info['pairs']} mean={info['mean']} bimodal={info['bimodal']}"
            for name, info in summary.items()
        ]
        + [f"wrote {args.out} and {sidecar}"],
    )
    return _EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    corpus = corpus_mod.load_corpus(args.corpus or config.paths.corpus)
    index = load_index(args.index or config.paths.index)
    _check_dim(config, index)
    provider = make_embedding_provider(config)
    chat = make_chat_provider(config)
    queries = evaluation.load_query_set(args.queries, known_unit_ids=corpus.unit_ids())
    k = config.defaults.k if args.k is None else args.k
    strategies = None
    if args.strategies != "all":
        strategies = [StrategyKind(s.strip()) for s in args.strategies.split(",") if s.strip()]
    result = evaluation.run_harness(
        corpus, index, provider, chat, queries, k=k, strategies=strategies
    )
    evaluation.emit_report(result.reports, args.out, format=args.report_format, k=k)
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            for record in result.generation_records:
                fh.write(
                    json.dumps(
                        {
                            "system": record.prompt.system,
                            "user": record.prompt.user,
                            "context_order": list(record.context_order),
                            "response": record.response,
                            "model_id": record.model_id,
                            "latency_ms": record.latency_ms,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    tallies = {r.hypothesis_id: r.support_label for r in result.reports}
    _emit(
        {"out": str(args.out), "k": k, "tallies": tallies},
        args.json,
        [f"{hid}: {label}" for hid, label in tallies.items()] + [f"wrote {args.out}"],
    )
    return _EXIT_OK


def cmd_permute(args: argparse.Namespace, config: Config) -> int:
    provider = make_embedding_provider(config)
    chat = make_chat_provider(config)
    if args.context:
        contexts = list(args.context)
    else:
        index = load_index(args.index or config.paths.index)
        _check_dim(config, index)
        result = run_strategy(
            index,
            provider,
            StrategyKind(args.strategy),
            args.query,
            config.defaults.k if args.k is None else args.k,
        )
        contexts = list(result.context_texts)
    runs = permutation_experiment(chat, provider, contexts, args.query, args.max_permutations)
    similarities = [r.similarity_to_first for r in runs]
    uniform = all(s == 1.0 for s in similarities)
    payload = {
        "permutations": len(runs),
        "min_similarity": min(similarities),
        "order_effect": not uniform,
        "runs": [
            {
                "order": list(r.order),
                "similarity": round(r.similarity_to_first, 6),
                "exact": r.exact_match,
            }
            for r in runs
        ],
    }
    lines = [
        f"order {list(r.order)}: similarity={r.similarity_to_first:.4f} exact={r.exact_match}"
        for r in runs
    ]
    lines.append("no order effect" if uniform else "order effect observed")
    _emit(payload, args.json, lines)
    return _EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragkit",
        description="Retrieval, diagnostics, and evaluation for technical-document QA",
    )
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable; beats file and environment)",
    )
    parser.add_argument("--jobs", type=int, help="cap concurrent provider requests")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("ingest", help="ingest documents and glossaries into a corpus file")
    p.add_argument("--doc", action="append", default=[], help="plain-text document (repeatable)")
    p.add_argument("--glossary", help="JSON-Lines glossary file")
    p.add_argument("--out", help="corpus JSON output path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = subparsers.add_parser("index", help="embed a corpus and write the binary index")
    p.add_argument("--corpus", help="corpus JSON path")
    p.add_argument("--out", help="index output path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_index)

    p = subparsers.add_parser("query", help="one-shot retrieval, optionally with generation")
    p.add_argument("--index", help="index path")
    p.add_argument("--query", required=True)
    p.add_argument(
        "--strategy",
        default=StrategyKind.GLOSSARY_BEST.value,
        choices=[s.value for s in StrategyKind],
    )
    p.add_argument("--k", type=int)
    p.add_argument("--show-prompt", action="store_true")
    p.add_argument("--generate", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = subparsers.add_parser("diagnose-chunks", help="chunk-length similarity study")
    p.add_argument("--index", help="index path")
    p.add_argument("--kinds", default="sentence", help="comma-separated unit kinds")
    p.add_argument("--threshold", type=int, help="word-count threshold between short and long")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--valley-ratio", type=float)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = subparsers.add_parser("eval", help="run the query set and emit hypothesis reports")
    p.add_argument("--corpus", help="corpus JSON path")
    p.add_argument("--index", help="index path")
    p.add_argument("--queries", required=True, help="JSON-Lines query set")
    p.add_argument(
        "--strategies",
        default="all",
        help="comma-separated strategy names to evaluate (default: all)",
    )
    p.add_argument("--k", type=int)
    p.add_argument("--report-format", default="markdown", choices=["markdown", "csv", "json"])
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--records", help="JSON-Lines output for generation records")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = subparsers.add_parser("permute-test", help="context-order permutation experiment")
    p.add_argument("--query", required=True)
    p.add_argument("--context", action="append", help="explicit context text (repeatable)")
    p.add_argument("--index", help="index to retrieve contexts from instead")
    p.add_argument(
        "--strategy",
        default=StrategyKind.SENTENCE_TO_PARAGRAPH.value,
        choices=[s.value for s in StrategyKind],
    )
    p.add_argument("--k", type=int)
    p.add_argument("--max-permutations", type=int, default=24)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_permute)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        apply_overrides(config, args.overrides)
        if args.jobs is not None:
            config.defaults.jobs = args.jobs
        config.validate()
        return args.func(args, config)
    except ProviderUnavailable as exc:
        print(f"ragkit: provider error: {exc}", file=sys.stderr)
        return _EXIT_PROVIDER
    except (RagkitError, OSError, ValueError) as exc:
        print(f"ragkit: error: {exc}", file=sys.stderr)
        return _EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
