from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from ecsp.core import AnnotationRecord, EmotionClass, JointEmbedding, Split

TESTS_DIR = Path(__file__).resolve().parent
CORPUS_DIR = TESTS_DIR / "fixtures" / "corpus60"
GOLDENS_DIR = TESTS_DIR / "goldens"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture(scope="session")
def goldens_dir() -> Path:
    return GOLDENS_DIR


def make_record(
    id: str = "r1",
    art_style: str = "Impressionism",
    language: str = "english",
    utterance: str = "a calm lake at dawn",
    split: Split = Split.TRAIN,
    gold: EmotionClass | None = EmotionClass.CONTENTMENT,
    image_ref: str = "",
) -> AnnotationRecord:
    return AnnotationRecord(
        id=id,
        art_style=art_style,
        language=language,
        utterance=utterance,
        split=split,
        image_ref=image_ref,
        gold_emotion=gold,
    )


def make_embedding(id: str, image, text) -> JointEmbedding:
    return JointEmbedding(
        id=id,
        image_part=np.asarray(image, dtype=np.float32),
        text_part=np.asarray(text, dtype=np.float32),
    )


def random_pool(
    rng: np.random.Generator,
    n: int,
    d_v: int,
    d_t: int,
    languages: tuple[str, ...] = ("english", "arabic", "chinese"),
    prefix: str = "p",
) -> list[tuple[AnnotationRecord, JointEmbedding]]:
    """Random labeled train pool spread across languages."""
    pool = []
    for i in range(n):
        vec = rng.normal(size=d_v + d_t)
        record = make_record(
            id=f"{prefix}{i:05d}",
            language=languages[i % len(languages)],
            split=Split.TRAIN,
            gold=EmotionClass(int(rng.integers(9))),
        )
        pool.append((record, make_embedding(record.id, vec[:d_v], vec[d_v:])))
    return pool
