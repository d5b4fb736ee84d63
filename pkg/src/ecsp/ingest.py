"""Dataset loading, validation, and persistence.

Two annotation formats (JSONL, CSV with header-mapped columns) and two
embedding formats: a JSONL text form and a packed little-endian binary
form that round-trips every 32-bit float bit-exactly.
"""

from __future__ import annotations

import csv
import json
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import jsonl
from .core import (
    AnnotationRecord,
    EmotionClass,
    JointEmbedding,
    Split,
    emotion_from_name,
    language_tag,
    validate_record,
)
from .errors import (
    CorruptFile,
    DimensionMismatch,
    DuplicateId,
    EmptyInput,
    ParseError,
    ValidationError,
    ZeroVector,
)

#: Packed embedding file layout: magic, u16 version, u32 d_v, u32 d_t,
#: u32 count; then per record u16 id byte-length, UTF-8 id bytes, and
#: (d_v + d_t) little-endian float32 values, image part first. No padding.
BINARY_MAGIC = b"ECSP"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def _record_from_mapping(row: dict, line: int) -> AnnotationRecord:
    for key in ("id", "art_style", "language", "utterance", "split"):
        if key not in row or row[key] is None:
            raise ValidationError(key, f"missing at line {line}")
    try:
        split = Split(str(row["split"]))
    except ValueError:
        raise ValidationError("split", f"unknown split {row['split']!r} at line {line}") from None
    emotion = row.get("emotion")
    gold: EmotionClass | None = None
    if emotion is not None and emotion != "":
        gold = emotion_from_name(str(emotion))
    return validate_record(
        AnnotationRecord(
            id=str(row["id"]),
            art_style=str(row["art_style"]),
            language=language_tag(str(row["language"])),
            utterance=str(row["utterance"]),
            split=split,
            image_ref=str(row.get("image_ref") or ""),
            gold_emotion=gold,
        )
    )


def load_annotations(path: str | Path, format: str = "jsonl") -> list[AnnotationRecord]:
    """Load one validated record per line/row, order preserved.

    Raises ParseError (with line number), DuplicateId, ValidationError, or
    UnknownEmotion on the first offending input.
    """
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown annotation format: {format!r}")
    records: list[AnnotationRecord] = []
    seen: set[str] = set()

    def take(record: AnnotationRecord):
        if record.id in seen:
            raise DuplicateId(record.id)
        seen.add(record.id)
        records.append(record)

    if format == "jsonl":
        for line_no, row in jsonl.read_lines(path):
            if not isinstance(row, dict):
                raise ParseError(line_no, "expected a JSON object")
            take(_record_from_mapping(row, line_no))
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return []
            for row in reader:
                take(_record_from_mapping(row, reader.line_num))
    return records


def write_annotations_jsonl(records: Sequence[AnnotationRecord], path: str | Path) -> int:
    def row(r: AnnotationRecord) -> dict:
        out = {
            "id": r.id,
            "art_style": r.art_style,
            "language": r.language,
            "utterance": r.utterance,
            "split": r.split.value,
            "image_ref": r.image_ref,
        }
        if r.gold_emotion is not None:
            out["emotion"] = r.gold_emotion.label
        return out

    return jsonl.write_lines(path, (row(r) for r in records))


def _check_dims(emb: JointEmbedding, dims: tuple[int, int] | None) -> tuple[int, int]:
    if dims is None:
        return (emb.d_v, emb.d_t)
    if (emb.d_v, emb.d_t) != dims:
        raise DimensionMismatch(emb.id, f"expected dims {dims}, got {(emb.d_v, emb.d_t)}")
    return dims


def load_embeddings(path: str | Path) -> list[JointEmbedding]:
    """Load embeddings from JSONL or the packed binary format.

    The binary form is detected by its magic bytes; anything else is
    treated as JSONL. Dimension consistency is enforced against the first
    entry.
    """
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return _load_embeddings_binary(p)
    return _load_embeddings_jsonl(p)


def _load_embeddings_jsonl(path: Path) -> list[JointEmbedding]:
    out: list[JointEmbedding] = []
    seen: set[str] = set()
    dims: tuple[int, int] | None = None
    for line_no, row in jsonl.read_lines(path):
        if not isinstance(row, dict):
            raise CorruptFile(line_no, "expected a JSON object")
        try:
            id = str(row["id"])
            image = row["image_embed"]
            text = row["text_embed"]
        except KeyError as exc:
            raise CorruptFile(line_no, f"missing key {exc.args[0]!r}") from None
        if id in seen:
            raise DuplicateId(id)
        seen.add(id)
        emb = JointEmbedding(id=id, image_part=image, text_part=text)
        dims = _check_dims(emb, dims)
        out.append(emb)
    return out


def _load_embeddings_binary(path: Path) -> list[JointEmbedding]:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise CorruptFile(0, "truncated header")
    magic, version, d_v, d_t, count = _HEADER.unpack_from(data, 0)
    if magic != BINARY_MAGIC:
        raise CorruptFile(0, "bad magic")
    if version != BINARY_VERSION:
        raise CorruptFile(4, f"unsupported version {version}")
    out: list[JointEmbedding] = []
    seen: set[str] = set()
    offset = _HEADER.size
    payload = 4 * (d_v + d_t)
    for _ in range(count):
        if offset + 2 > len(data):
            raise CorruptFile(offset, "truncated id length")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + payload > len(data):
            raise CorruptFile(offset, "truncated record")
        try:
            id = data[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptFile(offset, "id is not valid UTF-8") from None
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=d_v + d_t, offset=offset)
        offset += payload
        if id in seen:
            raise DuplicateId(id)
        seen.add(id)
        if not np.all(np.isfinite(vec)):
            raise CorruptFile(offset - payload, f"non-finite values (id {id!r})")
        if not np.any(vec):
            raise ZeroVector(id)
        out.append(JointEmbedding(id=id, image_part=vec[:d_v], text_part=vec[d_v:]))
    if offset != len(data):
        raise CorruptFile(offset, "trailing bytes after last record")
    return out


def write_embeddings_binary(embeddings: Sequence[JointEmbedding], path: str | Path) -> int:
    """Write the packed binary format; returns the byte count written.

    Read-back via load_embeddings reproduces every float bit-for-bit.
    """
    if not embeddings:
        raise EmptyInput("cannot write an empty embedding file")
    dims: tuple[int, int] | None = None
    for emb in embeddings:
        dims = _check_dims(emb, dims)
    d_v, d_t = dims
    parts = [_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, d_v, d_t, len(embeddings))]
    for emb in embeddings:
        id_bytes = emb.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValidationError("id", f"id longer than 65535 bytes: {emb.id[:32]!r}...")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(emb.joint.astype("<f4", copy=False).tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


def write_embeddings_jsonl(embeddings: Sequence[JointEmbedding], path: str | Path) -> int:
    """Write the JSONL text form. float32 values serialize through Python
    floats, so text -> binary -> text preserves bit patterns."""

    def row(e: JointEmbedding) -> dict:
        return {
            "id": e.id,
            "image_embed": [float(x) for x in e.image_part],
            "text_embed": [float(x) for x in e.text_part],
        }

    return jsonl.write_lines(path, (row(e) for e in embeddings))


@dataclass(frozen=True)
class DatasetManifest:
    """Summary of a validated annotations + embeddings pair."""

    records: tuple[AnnotationRecord, ...]
    embedding_dim_image: int
    embedding_dim_text: int
    language_counts: dict[str, int]
    split_counts: dict[str, int]
    n_embeddings: int
    ids_without_embedding: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_records": len(self.records),
                "d_v": self.embedding_dim_image,
                "d_t": self.embedding_dim_text,
                "languages": self.language_counts,
                "splits": self.split_counts,
                "n_embeddings": self.n_embeddings,
                "ids_without_embedding": self.ids_without_embedding,
            },
            sort_keys=True,
        )


def build_manifest(
    records: Sequence[AnnotationRecord], embeddings: Iterable[JointEmbedding]
) -> DatasetManifest:
    """Cross-validate records against embeddings.

    Every embedding id must name a record; dimensions must be constant
    (load_embeddings already guarantees the latter for a single file).
    """
    by_id = {r.id: r for r in records}
    dims: tuple[int, int] | None = None
    n_emb = 0
    covered: set[str] = set()
    for emb in embeddings:
        if emb.id not in by_id:
            raise ValidationError("id", f"embedding id {emb.id!r} has no annotation record")
        dims = _check_dims(emb, dims)
        covered.add(emb.id)
        n_emb += 1
    langs = Counter(r.language for r in records)
    splits = Counter(r.split.value for r in records)
    return DatasetManifest(
        records=tuple(records),
        embedding_dim_image=dims[0] if dims else 0,
        embedding_dim_text=dims[1] if dims else 0,
        language_counts={k: langs[k] for k in sorted(langs)},
        split_counts={k: splits[k] for k in sorted(splits)},
        n_embeddings=n_emb,
        ids_without_embedding=len(by_id) - len(covered),
    )
