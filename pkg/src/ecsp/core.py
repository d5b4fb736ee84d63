"""Shared domain types: emotion vocabulary, annotation records, embeddings.

The nine-class emotion vocabulary is ordered once here and reused verbatim
by every file format, vector layout, and report in the engine.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidVector, UnknownEmotion, ValidationError, ZeroVector

#: Canonical class order. Index i everywhere (files, vectors, reports)
#: refers to EMOTION_NAMES[i]. "something else" keeps its internal space.
EMOTION_NAMES: tuple[str, ...] = (
    "amusement",
    "awe",
    "contentment",
    "excitement",
    "anger",
    "disgust",
    "fear",
    "sadness",
    "something else",
)

NUM_CLASSES = len(EMOTION_NAMES)


class EmotionClass(enum.IntEnum):
    """One of the nine emotion classes; the integer value is the class index."""

    AMUSEMENT = 0
    AWE = 1
    CONTENTMENT = 2
    EXCITEMENT = 3
    ANGER = 4
    DISGUST = 5
    FEAR = 6
    SADNESS = 7
    SOMETHING_ELSE = 8

    @property
    def label(self) -> str:
        """Canonical lowercase name, e.g. "something else" for index 8."""
        return EMOTION_NAMES[self.value]


_NAME_TO_CLASS = {name: EmotionClass(i) for i, name in enumerate(EMOTION_NAMES)}


def emotion_from_name(name: str) -> EmotionClass:
    """Resolve a class name to its EmotionClass.

    Matching lowercases, trims, and collapses internal whitespace, so
    " Something   Else " resolves to SOMETHING_ELSE. Raises UnknownEmotion
    for anything outside the nine-class vocabulary.
    """
    key = " ".join(name.lower().split())
    try:
        return _NAME_TO_CLASS[key]
    except KeyError:
        raise UnknownEmotion(name) from None


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


def language_tag(value: str) -> str:
    """Normalize a language tag: trimmed, lowercase, non-empty.

    Tags are free-form identifiers compared by exact byte equality; the
    engine itself is language-agnostic.
    """
    tag = value.strip().lower()
    if not tag:
        raise ValidationError("language", "language tag is empty")
    return tag


@dataclass(frozen=True)
class AnnotationRecord:
    """One image+comment sample."""

    id: str
    art_style: str
    language: str
    utterance: str
    split: Split
    image_ref: str = ""
    gold_emotion: EmotionClass | None = None


def validate_record(record: AnnotationRecord) -> AnnotationRecord:
    """Return the record unchanged if all invariants hold.

    Raises ValidationError naming the first violated field, in the fixed
    order: id, art_style, language, utterance, split, gold_emotion.
    """
    if not isinstance(record.id, str) or not record.id:
        raise ValidationError("id", "must be a non-empty string")
    if not isinstance(record.art_style, str) or not record.art_style:
        raise ValidationError("art_style", "must be a non-empty string")
    if (
        not isinstance(record.language, str)
        or not record.language
        or record.language != record.language.strip().lower()
    ):
        raise ValidationError("language", "must be a non-empty lowercase trimmed tag")
    if not isinstance(record.utterance, str) or not record.utterance:
        raise ValidationError("utterance", "must be a non-empty string")
    if not isinstance(record.split, Split):
        raise ValidationError("split", "must be one of train/val/test")
    if record.gold_emotion is not None and not isinstance(record.gold_emotion, EmotionClass):
        raise ValidationError("gold_emotion", "must be an EmotionClass")
    if record.split is Split.TRAIN and record.gold_emotion is None:
        raise ValidationError("gold_emotion", "train records must carry a gold label")
    return record


def _as_part(value, name: str, id: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float32)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(name, f"must be a non-empty 1-D vector (id {id!r})")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, f"contains non-finite entries (id {id!r})")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class JointEmbedding:
    """Image and text embedding of one sample, stored as 32-bit floats.

    The joint vector is always the image part followed by the text part;
    similarity math upstream promotes to 64-bit.
    """

    id: str
    image_part: np.ndarray
    text_part: np.ndarray
    _joint: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("id", "embedding id must be a non-empty string")
        object.__setattr__(self, "image_part", _as_part(self.image_part, "image_part", self.id))
        object.__setattr__(self, "text_part", _as_part(self.text_part, "text_part", self.id))
        joint = np.concatenate([self.image_part, self.text_part])
        if not np.any(joint):
            raise ZeroVector(self.id)
        joint.flags.writeable = False
        object.__setattr__(self, "_joint", joint)

    @property
    def joint(self) -> np.ndarray:
        return self._joint

    @property
    def d_v(self) -> int:
        return int(self.image_part.shape[0])

    @property
    def d_t(self) -> int:
        return int(self.text_part.shape[0])


#: Absolute tolerance for probability vectors summing to 1.
SIMPLEX_ATOL = 1e-6


@dataclass(frozen=True)
class ProbabilityVector:
    """Per-class probabilities for one (sample, backend, TTA-variant)."""

    sample_id: str
    backend_id: str
    variant_id: str
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != NUM_CLASSES:
            raise InvalidVector(self.sample_id, f"expected {NUM_CLASSES} entries, got {len(probs)}")
        # 1e-12 slack then clamp: guards against one-ulp overshoot from
        # upstream renormalization without admitting real violations.
        for p in probs:
            if not (-1e-12 <= p <= 1.0 + 1e-12):
                raise InvalidVector(self.sample_id, f"entry {p!r} outside [0, 1]")
        total = sum(probs)
        if abs(total - 1.0) > SIMPLEX_ATOL:
            raise InvalidVector(self.sample_id, f"entries sum to {total!r}, not 1")
        object.__setattr__(self, "probs", tuple(min(max(p, 0.0), 1.0) for p in probs))
