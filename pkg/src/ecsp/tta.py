"""Test-time augmentation: deterministic variant plans and aggregation.

A plan always lists four variants - the original, both flips, and one
random crop whose offset is derived from a fixed 64-bit FNV-1a hash of
(sample_id, seed), so plans are reproducible across processes and
platforms. Probability vectors from the variants are fused by arithmetic
mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import jsonl
from .core import ProbabilityVector
from .errors import (
    CropOutOfBounds,
    DuplicateVariant,
    EmptyInput,
    InvalidSize,
    MixedSample,
    ShapeMismatch,
)

VARIANT_ORDER = ("identity", "hflip", "vflip", "crop")

DEFAULT_TARGET_SIZE = (768, 768)
DEFAULT_CROP_FRACTION = 0.875

AGGREGATE_VARIANT_ID = "tta-mean"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def plan_hash(sample_id: str, seed: int) -> int:
    """Hash driving crop placement: FNV-1a over the UTF-8 sample id
    followed by the seed's 8 little-endian bytes."""
    return fnv1a64(sample_id.encode("utf-8") + (seed & _MASK64).to_bytes(8, "little"))


@dataclass(frozen=True)
class TtaVariant:
    variant_id: str
    crop_params: tuple[int, int, int, int] | None = None  # (x0, y0, width, height)

    def __post_init__(self):
        if self.variant_id not in VARIANT_ORDER:
            raise InvalidSize(f"unknown variant id {self.variant_id!r}")
        if (self.variant_id == "crop") != (self.crop_params is not None):
            raise InvalidSize("crop_params must be present exactly for the crop variant")
        if self.crop_params is not None:
            x0, y0, w, h = self.crop_params
            if w < 1 or h < 1 or x0 < 0 or y0 < 0:
                raise InvalidSize(f"bad crop rectangle {self.crop_params}")


@dataclass(frozen=True)
class TtaPlan:
    sample_id: str
    source_size: tuple[int, int]  # (W, H)
    target_size: tuple[int, int]  # (w, h)
    variants: tuple[TtaVariant, ...]
    seed: int


def make_plan(
    sample_id: str,
    source_size: tuple[int, int],
    target_size: tuple[int, int] = DEFAULT_TARGET_SIZE,
    crop_fraction: float = DEFAULT_CROP_FRACTION,
    seed: int = 0,
) -> TtaPlan:
    """Build the four-variant plan for one sample.

    The crop rectangle has size (floor(f*W), floor(f*H)) and sits at a
    pseudo-random in-bounds offset derived from plan_hash(sample_id, seed).
    """
    W, H = source_size
    w, h = target_size
    if W < 1 or H < 1:
        raise InvalidSize(f"source size must be positive, got {source_size}")
    if w < 1 or h < 1:
        raise InvalidSize(f"target size must be positive, got {target_size}")
    if not (0.0 < crop_fraction <= 1.0):
        raise InvalidSize(f"crop_fraction must be in (0, 1], got {crop_fraction}")
    cw = max(1, int(crop_fraction * W))
    ch = max(1, int(crop_fraction * H))
    digest = plan_hash(sample_id, seed)
    max_x = W - cw
    max_y = H - ch
    x0 = digest % (max_x + 1)
    y0 = (digest // (max_x + 1)) % (max_y + 1)
    variants = (
        TtaVariant("identity"),
        TtaVariant("hflip"),
        TtaVariant("vflip"),
        TtaVariant("crop", crop_params=(x0, y0, cw, ch)),
    )
    return TtaPlan(
        sample_id=sample_id,
        source_size=(W, H),
        target_size=(w, h),
        variants=variants,
        seed=seed,
    )


def _bilinear_resize(pixels: np.ndarray, target_size: tuple[int, int]) -> np.ndarray:
    """Separable bilinear resampling with half-pixel-center coordinates."""
    w_out, h_out = target_size
    h_in, w_in = pixels.shape[:2]
    buf = pixels.astype(np.float64)

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        centers = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        centers = np.clip(centers, 0.0, n_in - 1)
        lo = np.floor(centers).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = centers - lo
        return lo, hi, frac

    ylo, yhi, yf = axis_coords(h_in, h_out)
    xlo, xhi, xf = axis_coords(w_in, w_out)
    yf = yf.reshape(-1, *([1] * (buf.ndim - 1)))
    rows = buf[ylo] * (1.0 - yf) + buf[yhi] * yf
    xf = xf.reshape(1, -1, *([1] * (buf.ndim - 2)))
    out = rows[:, xlo] * (1.0 - xf) + rows[:, xhi] * xf
    if np.issubdtype(pixels.dtype, np.integer):
        info = np.iinfo(pixels.dtype)
        return np.clip(np.rint(out), info.min, info.max).astype(pixels.dtype)
    return out.astype(pixels.dtype)


def apply_variant(
    pixels: np.ndarray, variant: TtaVariant, target_size: tuple[int, int]
) -> np.ndarray:
    """Transform a (H, W) or (H, W, C) buffer and resize to target_size.

    A no-op resize (source already at target size) returns the buffer
    bit-identically.
    """
    buf = np.asarray(pixels)
    if buf.ndim not in (2, 3):
        raise ShapeMismatch(f"expected a (H, W) or (H, W, C) buffer, got shape {buf.shape}")
    if variant.variant_id == "identity":
        view = buf
    elif variant.variant_id == "hflip":
        view = buf[:, ::-1]
    elif variant.variant_id == "vflip":
        view = buf[::-1, :]
    else:
        x0, y0, w, h = variant.crop_params
        h_in, w_in = buf.shape[:2]
        if x0 + w > w_in or y0 + h > h_in:
            raise CropOutOfBounds(
                f"crop {variant.crop_params} exceeds source {w_in}x{h_in}"
            )
        view = buf[y0 : y0 + h, x0 : x0 + w]
    w_out, h_out = target_size
    if view.shape[:2] == (h_out, w_out):
        return view.copy()
    return _bilinear_resize(view, target_size)


def aggregate_tta(vectors: Sequence[ProbabilityVector]) -> ProbabilityVector:
    """Arithmetic mean over one sample's variant probabilities,
    renormalized onto the simplex and tagged tta-mean."""
    if not vectors:
        raise EmptyInput("no probability vectors to aggregate")
    sample_id = vectors[0].sample_id
    backend_id = vectors[0].backend_id
    seen_variants: set[str] = set()
    for v in vectors:
        if v.sample_id != sample_id or v.backend_id != backend_id:
            raise MixedSample(
                f"cannot aggregate ({v.sample_id!r}, {v.backend_id!r}) with "
                f"({sample_id!r}, {backend_id!r})"
            )
        if v.variant_id in seen_variants:
            raise DuplicateVariant(v.variant_id)
        seen_variants.add(v.variant_id)
    # Canonical variant order makes the mean bitwise independent of the
    # caller's input order.
    ordered = sorted(vectors, key=lambda v: v.variant_id)
    mean = np.mean([v.probs for v in ordered], axis=0, dtype=np.float64)
    mean /= mean.sum()
    return ProbabilityVector(
        sample_id=sample_id,
        backend_id=backend_id,
        variant_id=AGGREGATE_VARIANT_ID,
        probs=tuple(float(p) for p in mean),
    )


# --- plan JSONL interface -----------------------------------------------------


def plan_to_row(plan: TtaPlan) -> dict:
    variants = []
    for v in plan.variants:
        entry: dict = {"variant_id": v.variant_id}
        if v.crop_params is not None:
            entry["crop"] = list(v.crop_params)
        variants.append(entry)
    return {
        "sample_id": plan.sample_id,
        "variants": variants,
        "target": list(plan.target_size),
        "seed": plan.seed,
    }


def write_plans(plans: Iterable[TtaPlan], path: str | Path) -> int:
    return jsonl.write_lines(path, (plan_to_row(p) for p in plans))
