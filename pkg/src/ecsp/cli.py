"""Command-line entry point.

Each subcommand runs one pipeline stage over line-oriented files; `run`
chains them all from a key-value config file. Errors print a single
machine-parseable JSON line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import backend_io, ensemble, ingest, metrics, promptgen, retrieval, tta
from .config import RunConfig, parse_size
from .core import Split
from .errors import EcspError
from .pipeline import render_prompts, run_pipeline
from .promptgen import PromptVariant


def _setup_logging():
    level = os.environ.get("ECSP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)


def _add_dataset_args(parser: argparse.ArgumentParser, embeddings_required: bool = True):
    parser.add_argument("--annotations", required=True, help="annotation JSONL/CSV path")
    parser.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    parser.add_argument(
        "--embeddings", required=embeddings_required, help="embedding JSONL or binary pack"
    )


def _load_dataset(args):
    records = ingest.load_annotations(args.annotations, args.format)
    embeddings = ingest.load_embeddings(args.embeddings)
    return records, embeddings


def cmd_ingest(args) -> int:
    records, embeddings = _load_dataset(args)
    manifest = ingest.build_manifest(records, embeddings)
    if args.out:
        n = ingest.write_embeddings_binary(embeddings, args.out)
        print(f"wrote {args.out} ({n} bytes)")
    print(manifest.to_json())
    return 0


def cmd_index(args) -> int:
    records, embeddings = _load_dataset(args)
    pool = retrieval.pool_from_dataset(records, embeddings)
    index_map = retrieval.build_index(pool, normalize_parts=args.normalize_parts)
    retrieval.save_index(index_map, args.out)
    for language in sorted(index_map):
        print(f"{language}\t{index_map[language].n}")
    return 0


def cmd_retrieve(args) -> int:
    records, embeddings = _load_dataset(args)
    if args.index:
        index_map = retrieval.load_index(args.index)
    else:
        pool = retrieval.pool_from_dataset(records, embeddings)
        index_map = retrieval.build_index(pool, normalize_parts=args.normalize_parts)
    split = Split(args.split)
    by_id = {e.id: e for e in embeddings}
    exclude_self = (split is Split.TRAIN) and not args.no_exclude_self
    outcomes = []
    for record in records:
        if record.split is not split:
            continue
        outcomes.append(
            retrieval.retrieve(
                by_id[record.id],
                record.language,
                index_map,
                k=args.k,
                eta=args.eta,
                exclude_id=record.id if exclude_self else None,
            )
        )
    n = retrieval.write_outcomes(outcomes, args.out)
    print(f"wrote {args.out} ({n} outcomes)")
    return 0


def cmd_prompt(args) -> int:
    records = ingest.load_annotations(args.annotations, args.format)
    variant = PromptVariant(args.variant)
    outcomes = {}
    if args.outcomes:
        outcomes = {o.query_id: o for o in retrieval.load_outcomes(args.outcomes)}
    if args.split:
        records = [r for r in records if r.split is Split(args.split)]
    artifacts = render_prompts(
        records,
        outcomes,
        variant,
        duplicate_utterance=args.duplicate_utterance,
        max_tokens=args.max_tokens,
    )
    n = promptgen.write_prompts(artifacts, args.out)
    print(f"wrote {args.out} ({n} prompts)")
    return 0


def cmd_tta_plan(args) -> int:
    records = ingest.load_annotations(args.annotations, args.format)
    if args.split:
        records = [r for r in records if r.split is Split(args.split)]
    source = parse_size(args.source, "source")
    target = parse_size(args.target, "target")
    plans = [
        tta.make_plan(
            record.id,
            source_size=source,
            target_size=target,
            crop_fraction=args.crop_fraction,
            seed=args.seed,
        )
        for record in records
    ]
    n = tta.write_plans(plans, args.out)
    print(f"wrote {args.out} ({n} plans)")
    return 0


def cmd_fuse(args) -> int:
    from .pipeline import _one_vector_per_backend

    vectors = []
    for path in args.probs:
        vectors.extend(backend_io.load_backend_outputs(path))
    collapsed = _one_vector_per_backend(vectors, not args.no_tta)
    if args.weights:
        config = ensemble.EnsembleConfig.from_file(args.weights)
    else:
        config = ensemble.EnsembleConfig.equal(sorted({v.backend_id for v in collapsed}))
    predictions = ensemble.fuse_batch(collapsed, config)
    n = ensemble.write_predictions(predictions, args.out)
    print(f"wrote {args.out} ({n} predictions)")
    return 0


def cmd_score(args) -> int:
    predictions = ensemble.load_predictions(args.predictions)
    records = ingest.load_annotations(args.annotations, args.format)
    gold = {r.id: r.gold_emotion for r in records}
    language = {r.id: r.language for r in records}
    pairs = []
    for p in predictions:
        if gold.get(p.sample_id) is None:
            raise EcspError(f"no gold label for sample {p.sample_id!r}")
        pairs.append((p.sample_id, gold[p.sample_id], p.predicted))

    rows = []
    if args.by_language:
        groups: dict[str, list] = {}
        for sample_id, g, pred in pairs:
            groups.setdefault(language[sample_id], []).append((g, pred))
        for lang in sorted(groups):
            rows.append((f"{args.method} [{lang}]", metrics.score(groups[lang])))
    scored = metrics.score([(g, p) for _, g, p in pairs])
    rows.append((args.method, scored))
    print(metrics.report(rows, average=args.average), end="")
    if args.out:
        Path(args.out).write_text(
            metrics.scores_to_json(args.method, scored) + "\n", encoding="utf-8"
        )
    return 0


def cmd_run(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else None
    cfg = RunConfig.from_file(args.config, out_dir=out_dir)
    summary = run_pipeline(cfg, remote=args.remote)
    print(json.dumps(summary, sort_keys=True))
    report = Path(cfg.out_dir) / "report.txt"
    if report.exists():
        print(report.read_text(encoding="utf-8"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecsp",
        description="Retrieval-augmented prompt construction and ensemble inference engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and pack embeddings")
    _add_dataset_args(p)
    p.add_argument("--out", help="binary embedding pack to write")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="build per-language retrieval indices")
    _add_dataset_args(p)
    p.add_argument("--out", required=True, help="index archive (.npz) to write")
    p.add_argument("--normalize-parts", action="store_true")
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("retrieve", help="emit retrieval outcomes for a query split")
    _add_dataset_args(p)
    p.add_argument("--index", help="prebuilt index archive; default rebuilds from inputs")
    p.add_argument("--split", default="val", choices=("train", "val", "test"))
    p.add_argument("--eta", type=float, default=retrieval.DEFAULT_ETA)
    p.add_argument("--k", type=int, default=retrieval.DEFAULT_K)
    p.add_argument("--no-exclude-self", action="store_true")
    p.add_argument("--normalize-parts", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("prompt", help="render prompts for a variant")
    p.add_argument("--annotations", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--variant", default="ecsp", choices=[v.value for v in PromptVariant])
    p.add_argument("--outcomes", help="retrieval outcome JSONL (required for pl/ecsp)")
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--duplicate-utterance", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_prompt)

    p = sub.add_parser("tta-plan", help="emit deterministic TTA plans")
    p.add_argument("--annotations", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--crop-fraction", type=float, default=tta.DEFAULT_CROP_FRACTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", default="768x768", help="target size WxH")
    p.add_argument("--source", default="768x768", help="source size WxH")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tta_plan)

    p = sub.add_parser("fuse", help="aggregate TTA variants and ensemble backends")
    p.add_argument("--probs", nargs="+", required=True, help="probability JSONL files")
    p.add_argument("--weights", help="ensemble config file (backend = weight)")
    p.add_argument("--no-tta", action="store_true", help="use identity variants only")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fuse)

    p = sub.add_parser("score", help="score predictions against gold labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--average", default="macro", choices=("macro", "micro", "weighted"))
    p.add_argument("--by-language", action="store_true")
    p.add_argument("--method", default="ensemble")
    p.add_argument("--out", help="scores JSON path")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's out_dir")
    p.add_argument("--remote", action="store_true", help="use remote.<id> backends")
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EcspError as exc:
        line = json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False
        )
        print(line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
