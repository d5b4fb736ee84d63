"""Per-language nearest-neighbor retrieval and pseudo-label gating.

An exact cosine-similarity scan over unit-normalized joint embeddings of
same-language labeled samples. The best neighbor's gold label is admitted
as a pseudo-label only when its similarity strictly exceeds the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import jsonl
from .core import AnnotationRecord, EmotionClass, JointEmbedding, Split, emotion_from_name
from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyAfterExclusion,
    EmptyPool,
    IdMismatch,
    MissingLanguageIndex,
    UnlabeledPoolRecord,
    ZeroVector,
)

#: Cosine-similarity admission threshold for pseudo-labels.
DEFAULT_ETA = 0.75
#: Number of neighbors retrieved.
DEFAULT_K = 1

#: Separator used when several gated neighbor labels are spliced into one
#: pseudo-label string (k > 1).
LABEL_SPLICE_SEPARATOR = ", "


class Neighbor(NamedTuple):
    id: str
    similarity: float


@dataclass(frozen=True, eq=False)
class LanguageIndex:
    """Immutable search structure for one language.

    Rows of `matrix` are unit-normalized float64 joint vectors; `ids` and
    `labels` are aligned with the rows.
    """

    language: str
    ids: tuple[str, ...]
    labels: tuple[EmotionClass, ...]
    matrix: np.ndarray
    d_v: int
    d_t: int
    normalize_parts: bool = False

    def __post_init__(self):
        ids_arr = np.asarray(self.ids, dtype=str)
        ids_arr.flags.writeable = False
        object.__setattr__(self, "_ids_arr", ids_arr)

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class RetrievalOutcome:
    """Neighbors of one query plus the threshold-gated pseudo-label.

    `gated_labels` holds the gold labels of neighbors whose similarity
    strictly exceeds `threshold_used`, in rank order; `pseudo_label` is the
    first of them (the top-1 gate) or None.
    """

    query_id: str
    neighbors: tuple[Neighbor, ...]
    pseudo_label: EmotionClass | None
    gated_labels: tuple[EmotionClass, ...]
    threshold_used: float
    k: int

    @property
    def pseudo_label_text(self) -> str | None:
        """Label string fed to prompt construction: the gated neighbors'
        labels in rank order, spliced with a comma separator."""
        if not self.gated_labels:
            return None
        return LABEL_SPLICE_SEPARATOR.join(label.label for label in self.gated_labels)


def _unit(vec: np.ndarray, id: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroVector(id)
    return vec / norm


def _prepare_vector(emb: JointEmbedding, normalize_parts: bool) -> np.ndarray:
    """Promote to float64 and unit-normalize, optionally each part first."""
    if normalize_parts:
        image = _unit(emb.image_part.astype(np.float64), emb.id)
        text = _unit(emb.text_part.astype(np.float64), emb.id)
        joint = np.concatenate([image, text])
    else:
        joint = emb.joint.astype(np.float64)
    return _unit(joint, emb.id)


def build_index(
    pool: Iterable[tuple[AnnotationRecord, JointEmbedding]],
    normalize_parts: bool = False,
) -> dict[str, LanguageIndex]:
    """Build one immutable index per language from labeled train records.

    Every pool record must be split=train and carry a gold label (pool
    membership is what makes a label available for pseudo-labeling).
    """
    groups: dict[str, list[tuple[str, EmotionClass, np.ndarray]]] = {}
    dims: tuple[int, int] | None = None
    seen: set[str] = set()
    for record, emb in pool:
        if record.id != emb.id:
            raise IdMismatch(record.id, emb.id)
        if record.split is not Split.TRAIN:
            raise UnlabeledPoolRecord(record.id, "pool records must be split=train")
        if record.gold_emotion is None:
            raise UnlabeledPoolRecord(record.id)
        if record.id in seen:
            raise DuplicateId(record.id)
        seen.add(record.id)
        if dims is None:
            dims = (emb.d_v, emb.d_t)
        elif dims != (emb.d_v, emb.d_t):
            raise DimensionMismatch(emb.id, f"expected dims {dims}, got {(emb.d_v, emb.d_t)}")
        vec = _prepare_vector(emb, normalize_parts)
        groups.setdefault(record.language, []).append((record.id, record.gold_emotion, vec))
    if not groups:
        raise EmptyPool()
    out: dict[str, LanguageIndex] = {}
    for language in sorted(groups):
        entries = groups[language]
        matrix = np.vstack([vec for _, _, vec in entries])
        matrix.flags.writeable = False
        out[language] = LanguageIndex(
            language=language,
            ids=tuple(id for id, _, _ in entries),
            labels=tuple(label for _, label, _ in entries),
            matrix=matrix,
            d_v=dims[0],
            d_t=dims[1],
            normalize_parts=normalize_parts,
        )
    return out


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (|a| |b|) in 64-bit, clamped to [-1, 1]."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.shape != bv.shape:
        raise DimensionMismatch(message=f"shapes {av.shape} and {bv.shape} differ")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector()
    sim = float(np.dot(av, bv) / (na * nb))
    return min(1.0, max(-1.0, sim))


def retrieve(
    query: JointEmbedding,
    language: str,
    index_map: Mapping[str, LanguageIndex],
    k: int = DEFAULT_K,
    eta: float = DEFAULT_ETA,
    exclude_id: str | None = None,
) -> RetrievalOutcome:
    """Top-k same-language neighbors of one query, with threshold gating.

    Neighbors are ordered by similarity descending with ties broken by
    ascending id; `exclude_id` implements leave-one-out for queries that
    are themselves pool members. A neighbor's label enters the gated list
    only when its similarity is strictly above `eta`.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    index = index_map.get(language)
    if index is None:
        raise MissingLanguageIndex(language)
    if (query.d_v, query.d_t) != (index.d_v, index.d_t):
        raise DimensionMismatch(
            query.id, f"query dims {(query.d_v, query.d_t)} vs index {(index.d_v, index.d_t)}"
        )
    q = _prepare_vector(query, index.normalize_parts)
    sims = index.matrix @ q
    np.clip(sims, -1.0, 1.0, out=sims)

    ids_arr: np.ndarray = index._ids_arr  # cached by __post_init__
    if exclude_id is None:
        candidates = np.arange(index.n)
    else:
        candidates = np.flatnonzero(ids_arr != exclude_id)
        if candidates.size == 0:
            raise EmptyAfterExclusion(language)

    # Similarity descending, then id ascending. lexsort's last key is the
    # primary one; negating sims is safe after the clip above.
    order = candidates[np.lexsort((ids_arr[candidates], -sims[candidates]))]
    top = order[: min(k, order.size)]

    neighbors = tuple(Neighbor(index.ids[i], float(sims[i])) for i in top)
    gated = tuple(index.labels[i] for i in top if float(sims[i]) > eta)
    return RetrievalOutcome(
        query_id=query.id,
        neighbors=neighbors,
        pseudo_label=gated[0] if gated else None,
        gated_labels=gated,
        threshold_used=eta,
        k=k,
    )


# --- outcome JSONL interface -------------------------------------------------


def outcome_to_row(outcome: RetrievalOutcome) -> dict:
    return {
        "query_id": outcome.query_id,
        "neighbors": [{"id": n.id, "sim": n.similarity} for n in outcome.neighbors],
        "pseudo_label": outcome.pseudo_label_text,
        "eta": outcome.threshold_used,
        "k": outcome.k,
    }


def write_outcomes(outcomes: Iterable[RetrievalOutcome], path: str | Path) -> int:
    return jsonl.write_lines(path, (outcome_to_row(o) for o in outcomes))


def load_outcomes(path: str | Path) -> list[RetrievalOutcome]:
    """Read the outcome JSONL back into RetrievalOutcome values.

    The gated label list is reconstructed from the spliced pseudo-label
    string; neighbor gold labels themselves are not stored in the file.
    """
    out: list[RetrievalOutcome] = []
    for _, row in jsonl.read_lines(path):
        label_text = row["pseudo_label"]
        if label_text is None:
            gated: tuple[EmotionClass, ...] = ()
        else:
            gated = tuple(
                emotion_from_name(part) for part in label_text.split(LABEL_SPLICE_SEPARATOR)
            )
        out.append(
            RetrievalOutcome(
                query_id=row["query_id"],
                neighbors=tuple(Neighbor(n["id"], float(n["sim"])) for n in row["neighbors"]),
                pseudo_label=gated[0] if gated else None,
                gated_labels=gated,
                threshold_used=float(row["eta"]),
                k=int(row["k"]),
            )
        )
    return out


# --- index persistence -------------------------------------------------------


def save_index(index_map: Mapping[str, LanguageIndex], path: str | Path) -> None:
    """Persist indices to a .npz archive (no pickling)."""
    arrays: dict[str, np.ndarray] = {}
    meta: dict[str, object] = {"languages": sorted(index_map)}
    for language, index in index_map.items():
        arrays[f"{language}__matrix"] = index.matrix
        arrays[f"{language}__ids"] = np.asarray(index.ids, dtype=str)
        arrays[f"{language}__labels"] = np.asarray([int(l) for l in index.labels], dtype=np.int64)
        meta[language] = {
            "d_v": index.d_v,
            "d_t": index.d_t,
            "normalize_parts": index.normalize_parts,
        }
    arrays["meta"] = np.asarray(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_index(path: str | Path) -> dict[str, LanguageIndex]:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        out: dict[str, LanguageIndex] = {}
        for language in meta["languages"]:
            info = meta[language]
            matrix = archive[f"{language}__matrix"]
            matrix.flags.writeable = False
            out[language] = LanguageIndex(
                language=language,
                ids=tuple(str(x) for x in archive[f"{language}__ids"]),
                labels=tuple(EmotionClass(int(x)) for x in archive[f"{language}__labels"]),
                matrix=matrix,
                d_v=int(info["d_v"]),
                d_t=int(info["d_t"]),
                normalize_parts=bool(info["normalize_parts"]),
            )
    return out


def pool_from_dataset(
    records: Sequence[AnnotationRecord], embeddings: Sequence[JointEmbedding]
) -> list[tuple[AnnotationRecord, JointEmbedding]]:
    """Pair train-split records with their embeddings, input order kept."""
    by_id = {e.id: e for e in embeddings}
    pool = []
    for record in records:
        if record.split is Split.TRAIN and record.id in by_id:
            pool.append((record, by_id[record.id]))
    return pool
