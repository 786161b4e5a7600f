"""Command-line entry point.

Subcommands: run, classify, report, index build, index query, manual build.

Exit codes: 0 ran to completion (unsolved exercises are data, not
failures), 1 usage/config/data error, 2 infrastructure error (provider or
toolchain). The process never surfaces a traceback for expected failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import analytics, diagnostics, retrieval
from .config import build_provider, build_toolchain, load_run_config
from .corpus import scan_corpus
from .errors import (
    ConfigError,
    CorpusError,
    HarnessError,
    ManifestError,
    ProviderUnavailable,
    ReplayMiss,
    ToolchainUnavailable,
)
from .manifest import read_manifest, write_manifest
from .refinement import RunContext, StrategyKind, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFRA = 2

_USAGE_ERRORS = (ConfigError, CorpusError, ManifestError)
_INFRA_ERRORS = (ProviderUnavailable, ReplayMiss, ToolchainUnavailable, OSError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; the harness reserves 2 for
    # infrastructure failures, so usage problems are rerouted.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _INFRA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA


def entrypoint() -> None:
    raise SystemExit(main())


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idris-harness", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-exercise progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a strategy over a corpus and write manifest + reports")
    run.add_argument("--config", type=Path, default=None, help="YAML config file")
    run.add_argument("--corpus", type=Path, default=None, help="corpus root (overrides config)")
    run.add_argument("--strategy", choices=[k.value for k in StrategyKind], default=None)
    run.add_argument("--max-iterations", type=int, default=None)
    run.add_argument("--parallelism", type=int, default=None)
    run.add_argument("--slugs", type=str, default=None, help="comma-separated slug filter")
    run.add_argument("--replay", type=Path, default=None, help="replay fixture (forces replay mode)")
    run.add_argument("--toolchain", type=str, default=None, help="adapter name (overrides config)")
    run.add_argument("--model", type=str, default=None, help="model name (overrides config)")
    run.add_argument("--out", type=Path, default=None, help="output directory")
    run.set_defaults(func=cmd_run)

    classify_p = sub.add_parser("classify", help="classify compile diagnostics found in a manifest")
    classify_p.add_argument("manifest", type=Path)
    classify_p.add_argument("--out", type=Path, default=Path("out"))
    classify_p.set_defaults(func=cmd_classify)

    report = sub.add_parser("report", help="solve-rate table, breakdown and regression from manifests")
    report.add_argument("manifests", type=Path, nargs="+")
    report.add_argument("--baseline", type=Path, default=None, help="baseline manifest for the delta column")
    report.add_argument("--out", type=Path, default=Path("out"))
    report.set_defaults(func=cmd_report)

    index = sub.add_parser("index", help="build or query a retrieval index")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    index_build = index_sub.add_parser("build", help="chunk and index a text document")
    index_build.add_argument("--doc", type=Path, required=True, help="plain-text document to index")
    index_build.add_argument("--doc-id", type=str, default=None, help="document id (defaults to file stem)")
    index_build.add_argument("--size", type=int, default=retrieval.DEFAULT_CHUNK_SIZE)
    index_build.add_argument("--overlap", type=int, default=retrieval.DEFAULT_CHUNK_OVERLAP)
    index_build.add_argument("--out", type=Path, required=True, help="index file to write")
    index_build.set_defaults(func=cmd_index_build)
    index_query = index_sub.add_parser("query", help="search an index")
    index_query.add_argument("--index", type=Path, required=True)
    index_query.add_argument("--query", type=str, required=True)
    index_query.add_argument("-k", type=int, default=retrieval.DEFAULT_TOP_K)
    index_query.set_defaults(func=cmd_index_query)

    manual = sub.add_parser("manual", help="build the error-avoidance manual from a manifest")
    manual_sub = manual.add_subparsers(dest="manual_command", required=True)
    manual_build = manual_sub.add_parser("build")
    manual_build.add_argument("manifest", type=Path)
    manual_build.add_argument("--out", type=Path, required=True, help="markdown file to write")
    manual_build.add_argument("--samples", type=int, default=3, help="sample diagnostics per category")
    manual_build.set_defaults(func=cmd_manual_build)

    return parser


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "corpus": args.corpus,
        "strategy": args.strategy,
        "max_iterations": args.max_iterations,
        "parallelism": args.parallelism,
        "slugs": [s.strip() for s in args.slugs.split(",") if s.strip()] if args.slugs else None,
        "replay": args.replay,
        "toolchain": args.toolchain,
        "model": args.model,
        "out": args.out,
    }
    cfg = load_run_config(args.config, overrides)
    provider = build_provider(cfg.provider)
    toolchain = build_toolchain(cfg.toolchain)

    refs = scan_corpus(cfg.corpus_root)
    if cfg.slug_filter is not None:
        wanted = set(cfg.slug_filter)
        refs = [r for r in refs if r.slug in wanted]
        missing = wanted - {r.slug for r in refs}
        if missing:
            raise ConfigError(f"slug filter names unknown exercises: {', '.join(sorted(missing))}")

    index = None
    if cfg.strategy.kind is StrategyKind.DOC_AUGMENTED:
        assert cfg.strategy.doc_source is not None
        index = retrieval.load_index(cfg.strategy.doc_source)

    ctx = RunContext(
        provider=provider,
        toolchain=toolchain,
        model_name=cfg.provider.model,
        index=index,
        retain_workspaces=cfg.retain_workspaces,
        temperature=cfg.provider.temperature,
    )
    records = run_suite(refs, cfg.strategy, ctx, parallelism=cfg.parallelism)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = cfg.output_dir / "manifest.jsonl"
    write_manifest(records, manifest_path)
    analytics.emit_report(records, cfg.output_dir, fmt="csv")
    analytics.emit_report(records, cfg.output_dir, fmt="markdown")

    solved = sum(1 for r in records if r.solved)
    errored = sum(1 for r in records if r.error)
    print(f"{len(records)} exercise(s): {solved} solved, {len(records) - solved} unsolved, {errored} errored")
    print(f"manifest: {manifest_path}")
    # unsolved exercises are data; a run where every exercise hit an
    # infrastructure failure is not
    infra_markers = ("ToolchainUnavailable", "ProviderUnavailable", "ReplayMiss")
    if records and all(r.error and r.error.startswith(infra_markers) for r in records):
        print(f"error: every exercise failed on infrastructure: {records[0].error}", file=sys.stderr)
        return EXIT_INFRA
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    records = read_manifest(args.manifest)
    classified = analytics.classify_manifest_errors(records)
    table_text, csv_text = analytics.error_report(classified)
    report_dir = args.out / analytics.REPORT_SUBDIR
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "errors.csv").write_text(csv_text, encoding="utf-8")
    (report_dir / "errors.txt").write_text(table_text, encoding="utf-8")
    print(table_text, end="")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    records = []
    for path in args.manifests:
        records.extend(read_manifest(path))
    baseline = read_manifest(args.baseline) if args.baseline else None
    analytics.emit_report(records, args.out, fmt="csv", baseline=baseline)
    analytics.emit_report(records, args.out, fmt="markdown", baseline=baseline)
    rows = analytics.solve_rate_rows(records, baseline=baseline)
    print(analytics.render_solve_rates_markdown(rows), end="")
    return EXIT_OK


def cmd_index_build(args: argparse.Namespace) -> int:
    text = args.doc.read_text(encoding="utf-8")
    doc_id = args.doc_id or args.doc.stem
    index = retrieval.index_document(doc_id, text, size=args.size, overlap=args.overlap)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    retrieval.save_index(index, args.out)
    print(f"indexed {len(index.chunks)} chunk(s) from {args.doc} into {args.out}")
    return EXIT_OK


def cmd_index_query(args: argparse.Namespace) -> int:
    index = retrieval.load_index(args.index)
    for chunk, score in retrieval.search(index, args.query, k=args.k):
        snippet = " ".join(chunk.text.split())
        if len(snippet) > 160:
            snippet = snippet[:157] + "..."
        print(f"{score:.4f}\t{chunk.doc_id}#{chunk.id}\t{snippet}")
    return EXIT_OK


def cmd_manual_build(args: argparse.Namespace) -> int:
    records = read_manifest(args.manifest)
    classified = analytics.classify_manifest_errors(records)
    dist = diagnostics.tally(classified)
    samples: dict[diagnostics.ErrorCategory, list[str]] = {}
    for err in classified:
        bucket = samples.setdefault(err.category, [])
        if err.excerpt and len(bucket) < args.samples:
            bucket.append(err.excerpt)
    manual_text = diagnostics.generate_manual(dist, samples, max_samples=args.samples)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(manual_text, encoding="utf-8")
    print(f"manual with {sum(1 for c in dist.counts.values() if c)} section(s) written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
