"""Full-run orchestration: the `run` subcommand body.

Every stage writes a line-oriented artifact into the output directory so
any stage can be inspected, diffed, or replaced by an external tool.
Given fixed inputs, flags, and seed, all outputs are byte-deterministic.
"""

from __future__ import annotations

import logging
from pathlib import Path

from . import backend_io, ensemble, ingest, metrics, promptgen, retrieval, tta
from .config import RunConfig
from .core import AnnotationRecord, ProbabilityVector, Split
from .errors import ValidationError
from .promptgen import PromptVariant

log = logging.getLogger("ecsp.pipeline")


def _render_prompt(
    record: AnnotationRecord,
    outcome: retrieval.RetrievalOutcome | None,
    variant: PromptVariant,
    duplicate_utterance: bool,
) -> promptgen.PromptArtifact:
    if variant is PromptVariant.SP:
        return promptgen.render_simple(record)
    if variant is PromptVariant.RAW:
        return promptgen.render_raw(record)
    if outcome is None:
        raise ValidationError("variant", f"variant {variant.value} needs retrieval outcomes")
    if variant is PromptVariant.ECSP:
        return promptgen.render_ecsp(record, outcome, duplicate_utterance=duplicate_utterance)
    return promptgen.render_pseudo_only(record, outcome)


def render_prompts(
    records: list[AnnotationRecord],
    outcomes: dict[str, retrieval.RetrievalOutcome],
    variant: PromptVariant,
    duplicate_utterance: bool = False,
    max_tokens: int | None = None,
) -> list[promptgen.PromptArtifact]:
    artifacts = []
    for record in records:
        artifact = _render_prompt(record, outcomes.get(record.id), variant, duplicate_utterance)
        if max_tokens is not None:
            artifact = promptgen.truncate_artifact(artifact, max_tokens)
        artifacts.append(artifact)
    return artifacts


def _collect_file_probs(cfg: RunConfig, query_ids: set[str]) -> list[ProbabilityVector]:
    vectors: list[ProbabilityVector] = []
    for backend_id in sorted(cfg.file_backends):
        path = cfg.file_backends[backend_id]
        for vector in backend_io.load_backend_outputs(path):
            if vector.backend_id != backend_id:
                raise ValidationError(
                    "backend_id",
                    f"{path} row for backend {vector.backend_id!r}, expected {backend_id!r}",
                )
            if vector.sample_id in query_ids:
                vectors.append(vector)
    return vectors


def _collect_remote_probs(
    cfg: RunConfig,
    records: list[AnnotationRecord],
    prompts: dict[str, promptgen.PromptArtifact],
    plans: dict[str, tta.TtaPlan],
) -> list[ProbabilityVector]:
    vectors: list[ProbabilityVector] = []
    for backend_id in sorted(cfg.remote_backends):
        expects_image = cfg.remote_expects_image.get(backend_id, False)
        max_tokens = cfg.remote_max_tokens.get(
            backend_id,
            backend_io.MAX_TOKENS_MULTIMODAL if expects_image else backend_io.MAX_TOKENS_UNIMODAL,
        )
        descriptor = backend_io.BackendDescriptor(
            backend_id=backend_id,
            mode="remote",
            location=cfg.remote_backends[backend_id],
            max_tokens=max_tokens,
            expects_image=expects_image,
        )
        items: list[tuple[promptgen.PromptArtifact, tta.TtaVariant | None, str | None]] = []
        for record in records:
            prompt = promptgen.truncate_artifact(prompts[record.id], max_tokens)
            image_ref = record.image_ref if expects_image else None
            if cfg.tta and expects_image:
                for variant in plans[record.id].variants:
                    items.append((prompt, variant, image_ref))
            else:
                items.append((prompt, None, image_ref))
        vectors.extend(backend_io.request_many(descriptor, items))
    return vectors


def _one_vector_per_backend(
    vectors: list[ProbabilityVector], use_tta: bool
) -> list[ProbabilityVector]:
    """Collapse TTA variants: aggregate when enabled, else pick identity."""
    grouped: dict[tuple[str, str], list[ProbabilityVector]] = {}
    for vector in vectors:
        grouped.setdefault((vector.sample_id, vector.backend_id), []).append(vector)
    out = []
    for key in sorted(grouped):
        group = grouped[key]
        if use_tta:
            out.append(tta.aggregate_tta(group))
        else:
            identity = [v for v in group if v.variant_id == "identity"]
            if identity:
                out.append(identity[0])
            elif len(group) == 1:
                out.append(group[0])
            else:
                raise ValidationError(
                    "variant_id",
                    f"sample {key[0]!r} backend {key[1]!r} has {len(group)} variants but tta is off",
                )
    return out


def run_pipeline(cfg: RunConfig, remote: bool = False) -> dict:
    """Execute ingest -> index -> retrieve -> prompt -> backend -> fuse ->
    score and write each stage's artifact under cfg.out_dir."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = ingest.load_annotations(cfg.annotations, cfg.annotations_format)
    embeddings = ingest.load_embeddings(cfg.embeddings)
    manifest = ingest.build_manifest(records, embeddings)
    (out_dir / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    ingest.write_embeddings_binary(embeddings, out_dir / "embeddings.ecsp")
    log.info("ingest: %d records, %d embeddings", len(records), manifest.n_embeddings)

    pool = retrieval.pool_from_dataset(records, embeddings)
    index_map = retrieval.build_index(pool, normalize_parts=cfg.normalize_parts)
    retrieval.save_index(index_map, out_dir / "index.npz")

    by_id = {e.id: e for e in embeddings}
    queries = [r for r in records if r.split is cfg.query_split]
    for record in queries:
        if record.id not in by_id:
            raise ValidationError("id", f"query record {record.id!r} has no embedding")

    exclude_self = cfg.exclude_self and cfg.query_split is Split.TRAIN
    outcomes: dict[str, retrieval.RetrievalOutcome] = {}
    for record in queries:
        outcomes[record.id] = retrieval.retrieve(
            by_id[record.id],
            record.language,
            index_map,
            k=cfg.k,
            eta=cfg.eta,
            exclude_id=record.id if exclude_self else None,
        )
    retrieval.write_outcomes(
        (outcomes[r.id] for r in queries), out_dir / "retrieval.jsonl"
    )

    prompts = render_prompts(
        queries,
        outcomes,
        cfg.prompt_variant,
        duplicate_utterance=cfg.duplicate_utterance,
        max_tokens=cfg.max_tokens,
    )
    promptgen.write_prompts(prompts, out_dir / "prompts.jsonl")
    prompt_by_id = {p.sample_id: p for p in prompts}

    plans: dict[str, tta.TtaPlan] = {}
    if cfg.tta:
        for record in queries:
            plans[record.id] = tta.make_plan(
                record.id,
                source_size=cfg.source_size,
                target_size=cfg.target_size,
                crop_fraction=cfg.crop_fraction,
                seed=cfg.seed,
            )
        tta.write_plans((plans[r.id] for r in queries), out_dir / "tta_plans.jsonl")

    query_ids = {r.id for r in queries}
    if remote:
        if not cfg.remote_backends:
            raise ValidationError("remote", "no remote.<backend> entries in config")
        raw_vectors = _collect_remote_probs(cfg, queries, prompt_by_id, plans)
    else:
        if not cfg.file_backends:
            raise ValidationError("backend", "no backend.<id> entries in config")
        raw_vectors = _collect_file_probs(cfg, query_ids)
    backend_io.write_backend_outputs(
        sorted(raw_vectors, key=lambda v: (v.sample_id, v.backend_id, v.variant_id)),
        out_dir / "probabilities.jsonl",
    )

    collapsed = _one_vector_per_backend(raw_vectors, cfg.tta)
    backend_ids = sorted({v.backend_id for v in collapsed})
    if cfg.weights:
        config = ensemble.EnsembleConfig.from_weights(cfg.weights)
    else:
        config = ensemble.EnsembleConfig.equal(backend_ids)
    predictions = ensemble.fuse_batch(collapsed, config)
    ensemble.write_predictions(predictions, out_dir / "predictions.jsonl")

    summary = {
        "records": len(records),
        "queries": len(queries),
        "predictions": len(predictions),
        "backends": backend_ids,
    }

    gold = {r.id: r.gold_emotion for r in queries}
    if predictions and all(gold[p.sample_id] is not None for p in predictions):
        pairs = [(gold[p.sample_id], p.predicted) for p in predictions]
        scored = metrics.score(pairs)
        (out_dir / "scores.json").write_text(
            metrics.scores_to_json(cfg.method, scored) + "\n", encoding="utf-8"
        )
        table = metrics.report([(cfg.method, scored)])
        (out_dir / "report.txt").write_text(table, encoding="utf-8")
        summary["scores"] = scored
    else:
        log.info("skipping scoring: gold labels missing for the %s split", cfg.query_split.value)
    return summary
