"""Key-value run configuration.

The config format is deliberately tiny: one `key = value` per line, `#`
comments, blank lines ignored. Relative paths are resolved against the
config file's directory so a run can be reproduced from its artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .core import Split
from .errors import ParseError, ValidationError
from .promptgen import PromptVariant
from .retrieval import DEFAULT_ETA, DEFAULT_K
from .tta import DEFAULT_CROP_FRACTION, DEFAULT_TARGET_SIZE


def parse_kv_file(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(line_no, f"expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ParseError(line_no, "empty key")
            if key in out:
                raise ParseError(line_no, f"duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValidationError(key, f"expected a boolean, got {value!r}")


def parse_size(value: str, key: str = "size") -> tuple[int, int]:
    """Parse "WxH" into a pair of positive ints."""
    parts = value.lower().split("x")
    if len(parts) != 2:
        raise ValidationError(key, f"expected WxH, got {value!r}")
    try:
        w, h = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValidationError(key, f"expected WxH integers, got {value!r}") from None
    if w < 1 or h < 1:
        raise ValidationError(key, f"sizes must be positive, got {value!r}")
    return (w, h)


@dataclass
class RunConfig:
    """Everything the `run` subcommand needs for one full pipeline pass."""

    annotations: Path
    embeddings: Path
    out_dir: Path
    annotations_format: str = "jsonl"
    query_split: Split = Split.VAL
    eta: float = DEFAULT_ETA
    k: int = DEFAULT_K
    normalize_parts: bool = False
    exclude_self: bool = True
    prompt_variant: PromptVariant = PromptVariant.ECSP
    duplicate_utterance: bool = False
    max_tokens: int | None = None
    tta: bool = True
    seed: int = 0
    crop_fraction: float = DEFAULT_CROP_FRACTION
    target_size: tuple[int, int] = DEFAULT_TARGET_SIZE
    source_size: tuple[int, int] = DEFAULT_TARGET_SIZE
    method: str = "ensemble"
    # file mode: backend_id -> probability JSONL path
    file_backends: dict[str, Path] = field(default_factory=dict)
    # remote mode: backend_id -> base URL, plus per-backend options
    remote_backends: dict[str, str] = field(default_factory=dict)
    remote_expects_image: dict[str, bool] = field(default_factory=dict)
    remote_max_tokens: dict[str, int] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)

    @staticmethod
    def from_file(path: str | Path, out_dir: Path | None = None) -> "RunConfig":
        path = Path(path)
        raw = parse_kv_file(path)
        base = path.parent

        def resolve(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else base / p

        for key in ("annotations", "embeddings"):
            if key not in raw:
                raise ValidationError(key, f"missing from config {path}")
        if out_dir is None:
            if "out_dir" not in raw:
                raise ValidationError("out_dir", "not in config and not given on the command line")
            out_dir = resolve(raw["out_dir"])

        cfg = RunConfig(
            annotations=resolve(raw["annotations"]),
            embeddings=resolve(raw["embeddings"]),
            out_dir=out_dir,
        )
        if "annotations_format" in raw:
            cfg.annotations_format = raw["annotations_format"]
        if "query_split" in raw:
            cfg.query_split = Split(raw["query_split"])
        if "eta" in raw:
            cfg.eta = float(raw["eta"])
        if "k" in raw:
            cfg.k = int(raw["k"])
        if "normalize_parts" in raw:
            cfg.normalize_parts = _parse_bool(raw["normalize_parts"], "normalize_parts")
        if "exclude_self" in raw:
            cfg.exclude_self = _parse_bool(raw["exclude_self"], "exclude_self")
        if "variant" in raw:
            cfg.prompt_variant = PromptVariant(raw["variant"])
        if "duplicate_utterance" in raw:
            cfg.duplicate_utterance = _parse_bool(raw["duplicate_utterance"], "duplicate_utterance")
        if "max_tokens" in raw:
            cfg.max_tokens = int(raw["max_tokens"])
        if "tta" in raw:
            cfg.tta = _parse_bool(raw["tta"], "tta")
        if "seed" in raw:
            cfg.seed = int(raw["seed"])
        if "crop_fraction" in raw:
            cfg.crop_fraction = float(raw["crop_fraction"])
        if "target_size" in raw:
            cfg.target_size = parse_size(raw["target_size"], "target_size")
        if "source_size" in raw:
            cfg.source_size = parse_size(raw["source_size"], "source_size")
        if "method" in raw:
            cfg.method = raw["method"]

        for key, value in raw.items():
            if key.startswith("backend."):
                cfg.file_backends[key[len("backend.") :]] = resolve(value)
            elif key.startswith("weight."):
                cfg.weights[key[len("weight.") :]] = float(value)
            elif key.startswith("remote.") and key.endswith(".expects_image"):
                backend_id = key[len("remote.") : -len(".expects_image")]
                cfg.remote_expects_image[backend_id] = _parse_bool(value, key)
            elif key.startswith("remote.") and key.endswith(".max_tokens"):
                backend_id = key[len("remote.") : -len(".max_tokens")]
                cfg.remote_max_tokens[backend_id] = int(value)
            elif key.startswith("remote."):
                cfg.remote_backends[key[len("remote.") :]] = value
        return cfg
