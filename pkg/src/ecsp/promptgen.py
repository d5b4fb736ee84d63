"""Prompt rendering for the four variants fed to model backends.

Rendering is single-pass string assembly: field values are inserted
verbatim (braces included) and are never re-substituted. The simple
prompt deliberately keeps the comma with no space before the utterance.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import jsonl
from .core import EMOTION_NAMES, AnnotationRecord, EmotionClass, validate_record
from .errors import IdMismatch
from .retrieval import RetrievalOutcome

#: "amusement, awe, ..., sadness or something else" - the vocabulary as the
#: prompt enumerates it, built from the canonical class order.
CLASS_ENUMERATION = ", ".join(EMOTION_NAMES[:-1]) + " or " + EMOTION_NAMES[-1]

PSEUDO_LABEL_SENTENCE_PREFIX = "The emotion this picture is most likely trying to express is "


class PromptVariant(str, enum.Enum):
    SP = "sp"
    PL = "pl"
    ECSP = "ecsp"
    RAW = "raw"


@dataclass(frozen=True)
class PromptArtifact:
    """A rendered prompt plus the provenance of any pseudo-label used."""

    sample_id: str
    variant: PromptVariant
    text: str
    pseudo_label_used: EmotionClass | None = None
    pseudo_label_text: str | None = None
    truncated: bool = False


def _simple_text(record: AnnotationRecord) -> str:
    return (
        "The art style of image is "
        + record.art_style
        + ". There is a comment from a "
        + record.language
        + " person. What emotions did he express? "
        + CLASS_ENUMERATION
        + ","
        + record.utterance
        + "."
    )


def _pseudo_sentence(label_text: str) -> str:
    return PSEUDO_LABEL_SENTENCE_PREFIX + label_text + "."


def render_simple(record: AnnotationRecord) -> PromptArtifact:
    """Render the attribute-based simple prompt (variant sp)."""
    validate_record(record)
    return PromptArtifact(sample_id=record.id, variant=PromptVariant.SP, text=_simple_text(record))


def render_ecsp(
    record: AnnotationRecord,
    outcome: RetrievalOutcome,
    duplicate_utterance: bool = False,
) -> PromptArtifact:
    """Render the retrieval-augmented prompt (variant ecsp).

    With a gated pseudo-label, the simple prompt is followed by the
    pseudo-label sentence; without one it degrades to exactly the simple
    rendering. `duplicate_utterance` additionally repeats the raw
    utterance between the two (off by default; see README).
    """
    validate_record(record)
    if outcome.query_id != record.id:
        raise IdMismatch(record.id, outcome.query_id)
    simple = _simple_text(record)
    label_text = outcome.pseudo_label_text
    if label_text is None:
        return PromptArtifact(sample_id=record.id, variant=PromptVariant.ECSP, text=simple)
    if duplicate_utterance:
        text = simple + " " + record.utterance + ". " + _pseudo_sentence(label_text)
    else:
        text = simple + " " + _pseudo_sentence(label_text)
    return PromptArtifact(
        sample_id=record.id,
        variant=PromptVariant.ECSP,
        text=text,
        pseudo_label_used=outcome.pseudo_label,
        pseudo_label_text=label_text,
    )


def render_pseudo_only(record: AnnotationRecord, outcome: RetrievalOutcome) -> PromptArtifact:
    """Render the pseudo-label-only ablation (variant pl): the raw
    utterance with the pseudo-label sentence appended when gated."""
    validate_record(record)
    if outcome.query_id != record.id:
        raise IdMismatch(record.id, outcome.query_id)
    label_text = outcome.pseudo_label_text
    if label_text is None:
        return PromptArtifact(sample_id=record.id, variant=PromptVariant.PL, text=record.utterance)
    return PromptArtifact(
        sample_id=record.id,
        variant=PromptVariant.PL,
        text=record.utterance + ". " + _pseudo_sentence(label_text),
        pseudo_label_used=outcome.pseudo_label,
        pseudo_label_text=label_text,
    )


def render_raw(record: AnnotationRecord) -> PromptArtifact:
    """The bare utterance (variant raw)."""
    validate_record(record)
    return PromptArtifact(sample_id=record.id, variant=PromptVariant.RAW, text=record.utterance)


_TOKEN = re.compile(r"\S+")


def truncate_tokens(text: str, max_tokens: int) -> tuple[str, bool]:
    """Cut whitespace-delimited tokens off the end beyond max_tokens.

    The string is cut at the end of the last kept token, so original
    inter-token whitespace survives and the operation is idempotent.
    """
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    spans = [m.span() for m in _TOKEN.finditer(text)]
    if len(spans) <= max_tokens:
        return text, False
    return text[: spans[max_tokens - 1][1]], True


def truncate_artifact(artifact: PromptArtifact, max_tokens: int) -> PromptArtifact:
    text, truncated = truncate_tokens(artifact.text, max_tokens)
    if not truncated:
        return artifact
    return PromptArtifact(
        sample_id=artifact.sample_id,
        variant=artifact.variant,
        text=text,
        pseudo_label_used=artifact.pseudo_label_used,
        pseudo_label_text=artifact.pseudo_label_text,
        truncated=True,
    )


# --- prompt JSONL interface ---------------------------------------------------


def artifact_to_row(artifact: PromptArtifact) -> dict:
    return {
        "sample_id": artifact.sample_id,
        "variant": artifact.variant.value,
        "text": artifact.text,
        "pseudo_label": artifact.pseudo_label_text,
        "truncated": artifact.truncated,
    }


def write_prompts(artifacts: Iterable[PromptArtifact], path: str | Path) -> int:
    return jsonl.write_lines(path, (artifact_to_row(a) for a in artifacts))


def load_prompts(path: str | Path) -> list[PromptArtifact]:
    out = []
    for _, row in jsonl.read_lines(path):
        label_text = row.get("pseudo_label")
        out.append(
            PromptArtifact(
                sample_id=row["sample_id"],
                variant=PromptVariant(row["variant"]),
                text=row["text"],
                pseudo_label_used=None,
                pseudo_label_text=label_text,
                truncated=bool(row["truncated"]),
            )
        )
    return out
