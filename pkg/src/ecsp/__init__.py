"""Retrieval-augmented prompt construction and ensemble inference engine
for multilingual emotion classification over image+comment samples."""

from .core import (
    EMOTION_NAMES,
    NUM_CLASSES,
    AnnotationRecord,
    EmotionClass,
    JointEmbedding,
    ProbabilityVector,
    Split,
    emotion_from_name,
    language_tag,
    validate_record,
)
from .ensemble import EnsembleConfig, Prediction, fuse, fuse_batch
from .ingest import load_annotations, load_embeddings, write_embeddings_binary
from .metrics import ConfusionMatrix, report, score
from .promptgen import (
    PromptArtifact,
    PromptVariant,
    render_ecsp,
    render_pseudo_only,
    render_raw,
    render_simple,
    truncate_tokens,
)
from .retrieval import (
    DEFAULT_ETA,
    DEFAULT_K,
    LanguageIndex,
    RetrievalOutcome,
    build_index,
    cosine_similarity,
    retrieve,
)
from .tta import TtaPlan, TtaVariant, aggregate_tta, apply_variant, make_plan

__version__ = "0.1.0"

__all__ = [
    "EMOTION_NAMES",
    "NUM_CLASSES",
    "AnnotationRecord",
    "EmotionClass",
    "JointEmbedding",
    "ProbabilityVector",
    "Split",
    "emotion_from_name",
    "language_tag",
    "validate_record",
    "EnsembleConfig",
    "Prediction",
    "fuse",
    "fuse_batch",
    "load_annotations",
    "load_embeddings",
    "write_embeddings_binary",
    "ConfusionMatrix",
    "report",
    "score",
    "PromptArtifact",
    "PromptVariant",
    "render_ecsp",
    "render_pseudo_only",
    "render_raw",
    "render_simple",
    "truncate_tokens",
    "DEFAULT_ETA",
    "DEFAULT_K",
    "LanguageIndex",
    "RetrievalOutcome",
    "build_index",
    "cosine_similarity",
    "retrieve",
    "TtaPlan",
    "TtaVariant",
    "aggregate_tta",
    "apply_variant",
    "make_plan",
    "__version__",
]
