"""Late fusion of per-backend probability vectors.

Fusion is a weighted arithmetic mean in probability space; the predicted
class is the argmax with ties resolved to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import jsonl
from .core import NUM_CLASSES, EmotionClass, ProbabilityVector
from .errors import EmptyInput, InvalidVector, MissingBackend, ValidationError


@dataclass(frozen=True)
class EnsembleConfig:
    """Backend weights, normalized to sum 1 and iterated in sorted order."""

    backend_weights: dict[str, float]

    @staticmethod
    def from_weights(weights: Mapping[str, float]) -> "EnsembleConfig":
        if not weights:
            raise EmptyInput("ensemble config needs at least one backend")
        total = 0.0
        for backend_id, weight in weights.items():
            w = float(weight)
            if w < 0 or not np.isfinite(w):
                raise ValidationError("backend_weights", f"weight for {backend_id!r} is {weight!r}")
            total += w
        if total <= 0:
            raise ValidationError("backend_weights", "at least one weight must be positive")
        normalized = {b: float(weights[b]) / total for b in sorted(weights)}
        return EnsembleConfig(backend_weights=normalized)

    @staticmethod
    def equal(backend_ids: Iterable[str]) -> "EnsembleConfig":
        return EnsembleConfig.from_weights({b: 1.0 for b in backend_ids})

    @staticmethod
    def from_file(path: str | Path) -> "EnsembleConfig":
        from .config import parse_kv_file

        raw = parse_kv_file(path)
        return EnsembleConfig.from_weights({k: float(v) for k, v in raw.items()})


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    fused_probs: tuple[float, ...]
    predicted: EmotionClass
    contributing_backends: tuple[str, ...]


def fuse(
    sample_id: str,
    per_backend: Mapping[str, ProbabilityVector],
    config: EnsembleConfig,
) -> Prediction:
    """Weighted mean over the configured backends for one sample.

    Every configured backend must be present; backends outside the config
    are ignored. np.argmax returns the first maximum, which implements the
    lowest-class-index tie-break.
    """
    fused = np.zeros(NUM_CLASSES, dtype=np.float64)
    for backend_id, weight in config.backend_weights.items():
        vector = per_backend.get(backend_id)
        if vector is None:
            raise MissingBackend(backend_id, sample_id)
        if vector.sample_id != sample_id:
            raise InvalidVector(
                backend_id, f"vector is for sample {vector.sample_id!r}, not {sample_id!r}"
            )
        fused += weight * np.asarray(vector.probs, dtype=np.float64)
    predicted = EmotionClass(int(np.argmax(fused)))
    return Prediction(
        sample_id=sample_id,
        fused_probs=tuple(float(p) for p in fused),
        predicted=predicted,
        contributing_backends=tuple(sorted(config.backend_weights)),
    )


def fuse_batch(
    vectors: Iterable[ProbabilityVector], config: EnsembleConfig
) -> list[Prediction]:
    """One Prediction per sample, ordered by sample_id.

    Input rows may arrive in any order; each (sample, backend) pair must
    appear exactly once (aggregate TTA variants first).
    """
    grouped: dict[str, dict[str, ProbabilityVector]] = {}
    for vector in vectors:
        per_backend = grouped.setdefault(vector.sample_id, {})
        if vector.backend_id in per_backend:
            raise InvalidVector(
                vector.backend_id,
                f"duplicate vector for sample {vector.sample_id!r}; aggregate variants first",
            )
        per_backend[vector.backend_id] = vector
    return [fuse(sample_id, grouped[sample_id], config) for sample_id in sorted(grouped)]


# --- predictions JSONL interface ----------------------------------------------


def prediction_to_row(prediction: Prediction) -> dict:
    return {
        "sample_id": prediction.sample_id,
        "probs": list(prediction.fused_probs),
        "predicted": prediction.predicted.label,
        "backends": list(prediction.contributing_backends),
    }


def write_predictions(predictions: Iterable[Prediction], path: str | Path) -> int:
    return jsonl.write_lines(path, (prediction_to_row(p) for p in predictions))


def load_predictions(path: str | Path) -> list[Prediction]:
    from .core import emotion_from_name

    out = []
    for _, row in jsonl.read_lines(path):
        out.append(
            Prediction(
                sample_id=row["sample_id"],
                fused_probs=tuple(float(p) for p in row["probs"]),
                predicted=emotion_from_name(row["predicted"]),
                contributing_backends=tuple(row["backends"]),
            )
        )
    return out
