"""Command-line entry points for the full workflow.

    opencoding ingest chat.tsv --base-year 2017 --out dataset.json
    opencoding segment dataset.json --min-gap-min 180 --out chunks.json
    opencoding run --approach all --dataset dataset.json --backend mock --seed 7 --out-dir artifacts/
    opencoding aggregate artifacts/responses_item.json --dataset dataset.json --out codebook.json
    opencoding fixtures load --store store/
    opencoding report --store store/
    opencoding serve --store store/ --port 8765 --static ui-dist/
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import codebook as cb
from . import runner
from .corpus import ingest_dataset, load_dataset, save_dataset
from .evaluation import metrics_report, open_store, render_report_table
from .fixtures import load_fixtures
from .gateway import Gateway, SamplingParams, make_backend
from .segmenter import (
    GAP_THRESHOLD,
    SMOOTHED_ACTIVITY,
    SegmentationConfig,
    attach_context,
    chunks_from_doc,
    chunks_to_doc,
    segment,
)
from .server import make_server, serve_forever

logger = logging.getLogger(__name__)

APPROACH_CHOICES = ("topic", "chunk", "item", "verb", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opencoding", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse a source file into a dataset document")
    p_ingest.add_argument("source")
    p_ingest.add_argument("--base-year", type=int, required=True)
    p_ingest.add_argument("--out", required=True)
    p_ingest.add_argument("--research-question", default="")
    p_ingest.add_argument("--coding-notes", default="")
    p_ingest.add_argument("--language-note", default="")
    p_ingest.add_argument("--meta", help="JSON file with research_question/coding_notes/language_note")

    p_segment = sub.add_parser("segment", help="split a dataset into chunks with context")
    p_segment.add_argument("dataset")
    p_segment.add_argument("--method", choices=("gap", "activity"), default="gap")
    p_segment.add_argument("--min-gap-min", type=float, default=180.0)
    p_segment.add_argument("--bandwidth-min", type=float, default=30.0)
    p_segment.add_argument("--min-chunk", type=int, default=3)
    p_segment.add_argument("--context", type=int, default=3)
    p_segment.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run coding approaches and write artifacts")
    p_run.add_argument("--approach", choices=APPROACH_CHOICES, default="all")
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--chunks", help="chunks document; segmented on the fly if omitted")
    p_run.add_argument("--backend", choices=("live", "replay", "mock"), default="mock")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--record", help="record exchanges into this fixture directory")
    p_run.add_argument("--fixtures", help="fixture directory for the replay backend")
    p_run.add_argument("--replay-origin", default="live")
    p_run.add_argument("--carry", choices=("on", "off"), default="on")
    p_run.add_argument("--threshold", type=float, default=0.8)
    p_run.add_argument("--top-k", type=int, default=10)
    p_run.add_argument("--oversize", type=float, default=0.25)
    p_run.add_argument("--embedder", choices=("tfidf", "remote"), default="tfidf")
    p_run.add_argument("--out-dir", required=True)

    p_agg = sub.add_parser("aggregate", help="merge a responses file into a codebook")
    p_agg.add_argument("responses")
    p_agg.add_argument("--dataset", required=True)
    p_agg.add_argument("--out", required=True)

    p_export = sub.add_parser("export", help="render a codebook document")
    p_export.add_argument("codebook")
    p_export.add_argument("--format", choices=("table", "structured"), default="table")
    p_export.add_argument("--out")

    p_report = sub.add_parser("report", help="per-approach evaluation report")
    p_report.add_argument("--store", required=True)
    p_report.add_argument("--approach", default="all")
    p_report.add_argument("--format", choices=("table", "json"), default="table")

    p_fixtures = sub.add_parser("fixtures", help="manage bundled evaluation fixtures")
    fixtures_sub = p_fixtures.add_subparsers(dest="fixtures_command", required=True)
    p_load = fixtures_sub.add_parser("load", help="install fixture codebooks and annotations")
    p_load.add_argument("source", nargs="?", help="fixture directory (bundled set if omitted)")
    p_load.add_argument("--store", required=True)
    p_load.add_argument(
        "--pending",
        action="store_true",
        help="leave raters incomplete and disagreements unresolved for interactive review",
    )

    p_serve = sub.add_parser("serve", help="serve codebooks/annotations over HTTP")
    p_serve.add_argument("--store", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--static", help="directory of built review-UI assets to host")

    return parser


def _cmd_ingest(args) -> int:
    meta = {}
    if args.meta:
        meta = json.loads(Path(args.meta).read_text(encoding="utf-8"))
    dataset = ingest_dataset(
        args.source,
        base_year=args.base_year,
        research_question=args.research_question or meta.get("research_question", ""),
        coding_notes=args.coding_notes or meta.get("coding_notes", ""),
        language_note=args.language_note or meta.get("language_note", ""),
    )
    save_dataset(dataset, args.out)
    print(f"{len(dataset)} messages -> {args.out}")
    return 0


def _cmd_segment(args) -> int:
    dataset = load_dataset(args.dataset)
    config = SegmentationConfig(
        method=GAP_THRESHOLD if args.method == "gap" else SMOOTHED_ACTIVITY,
        min_gap_minutes=args.min_gap_min,
        kernel_bandwidth_minutes=args.bandwidth_min,
        min_chunk_size=args.min_chunk,
    )
    chunks = attach_context(segment(dataset, config), k=args.context)
    Path(args.out).write_text(
        json.dumps(chunks_to_doc(chunks, config), indent=1) + "\n", encoding="utf-8"
    )
    print(f"{len(chunks)} chunks -> {args.out}")
    return 0


def _cmd_run(args) -> int:
    dataset = load_dataset(args.dataset)
    chunks = None
    if args.chunks:
        chunks = chunks_from_doc(json.loads(Path(args.chunks).read_text(encoding="utf-8")))
    backend = make_backend(
        args.backend,
        seed=args.seed,
        fixture_dir=args.fixtures,
        replay_origin=args.replay_origin,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gateway = Gateway(
        backend,
        transcript_path=out_dir / "transcript.jsonl",
        record_dir=args.record,
        params=SamplingParams(temperature=0.0, seed=args.seed),
    )
    approaches = list(runner.APPROACH_RUNNERS) if args.approach == "all" else [args.approach]
    manifest = runner.run_approaches(
        dataset,
        gateway,
        out_dir,
        approaches,
        chunks=chunks,
        topic_config=runner.TopicConfig(
            distance_threshold=args.threshold,
            top_k=args.top_k,
            oversize_ratio=args.oversize,
            embedder=args.embedder,
        ),
        carry_enabled=(args.carry == "on"),
        backend_name=args.backend,
        seed=args.seed,
    )
    for approach, entry in manifest["approaches"].items():
        print(f"{approach}: {entry['codes']} codes -> {out_dir / entry['codebook']}")
    return 0


def _cmd_aggregate(args) -> int:
    doc = json.loads(Path(args.responses).read_text(encoding="utf-8"))
    dataset = load_dataset(args.dataset)
    book = runner.aggregate_responses(doc, dataset)
    cb.save_codebook(book, args.out)
    print(f"{len(book)} codes -> {args.out}")
    return 0


def _cmd_export(args) -> int:
    book = cb.load_codebook(args.codebook)
    rendered = cb.export_codebook(book, args.format)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"-> {args.out}")
    else:
        sys.stdout.write(rendered)
    return 0


def _cmd_report(args) -> int:
    codebooks, store = open_store(args.store)
    if args.approach != "all":
        codebooks = {a: b for a, b in codebooks.items() if a == args.approach}
    report = metrics_report(codebooks, store)
    if args.format == "json":
        print(json.dumps(report, indent=1, ensure_ascii=False))
    else:
        sys.stdout.write(render_report_table(report))
    return 0


def _cmd_fixtures(args) -> int:
    if args.fixtures_command == "load":
        store = load_fixtures(args.store, source_dir=args.source, pending=args.pending)
        state = "pending review" if args.pending else "finalized"
        print(
            f"loaded {len(store.codebooks)} codebooks and "
            f"{len(store.annotations)} annotations into {args.store} ({state})"
        )
        return 0
    raise ValueError(f"unknown fixtures command: {args.fixtures_command}")


def _cmd_serve(args) -> int:
    codebooks, store = open_store(args.store)
    server = make_server(
        codebooks, store, host=args.host, port=args.port, static_dir=args.static
    )
    host, port = server.server_address[:2]
    print(f"serving {len(codebooks)} codebooks on http://{host}:{port}/", flush=True)
    try:
        serve_forever(server)
    finally:
        store.snapshot(Path(args.store) / "snapshot.json")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "segment": _cmd_segment,
    "run": _cmd_run,
    "aggregate": _cmd_aggregate,
    "export": _cmd_export,
    "report": _cmd_report,
    "fixtures": _cmd_fixtures,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
