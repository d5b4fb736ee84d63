"""Model-backend interfaces: probability files and the /predict protocol.

File mode keeps the whole pipeline runnable with no live model; remote
mode speaks minimal JSON-over-HTTP to any server that implements
POST /predict and GET /healthz.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from . import jsonl
from .core import NUM_CLASSES, SIMPLEX_ATOL, ProbabilityVector
from .errors import BadRow, NotOnSimplex, ProtocolError, Timeout
from .promptgen import PromptArtifact
from .tta import TtaVariant

MAX_ATTEMPTS = 3
BACKOFF_INITIAL_S = 0.25
DEFAULT_TIMEOUT_S = 10.0
DEFAULT_IN_FLIGHT = 8

#: Token budgets for the two backend families.
MAX_TOKENS_UNIMODAL = 90
MAX_TOKENS_MULTIMODAL = 100


@dataclass(frozen=True)
class BackendDescriptor:
    backend_id: str
    mode: str  # "file" | "remote"
    location: str  # path or base URL
    max_tokens: int = MAX_TOKENS_UNIMODAL
    expects_image: bool = False

    def __post_init__(self):
        if self.mode not in ("file", "remote"):
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")


#: Below this drift a row counts as already normalized. Renormalizing
#: ulp-level drift would flip low bits on every parse and break
#: parse-serialize-parse byte stability.
_RENORM_DEAD_BAND = 1e-9


def _validated_probs(values, line: int) -> tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or len(values) != NUM_CLASSES:
        raise BadRow(line, f"probs must hold {NUM_CLASSES} numbers")
    probs = []
    for value in values:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadRow(line, f"non-numeric probability {value!r}")
        p = float(value)
        if not (0.0 <= p <= 1.0):
            raise BadRow(line, f"probability {p!r} outside [0, 1]")
        probs.append(p)
    total = sum(probs)
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise NotOnSimplex(line, f"probabilities sum to {total!r}")
    if abs(total - 1.0) <= _RENORM_DEAD_BAND:
        return tuple(probs)
    # Exact division; the result lands inside the dead band, so a second
    # parse leaves the bytes untouched.
    return tuple(p / total for p in probs)


def load_backend_outputs(path: str | Path) -> list[ProbabilityVector]:
    """Read probability JSONL; rows within the simplex tolerance are
    renormalized exactly, larger deviations are rejected."""
    out: list[ProbabilityVector] = []
    for line_no, row in jsonl.read_lines(path):
        if not isinstance(row, dict):
            raise BadRow(line_no, "expected a JSON object")
        try:
            sample_id = str(row["sample_id"])
            backend_id = str(row["backend_id"])
            variant_id = str(row["variant_id"])
            values = row["probs"]
        except KeyError as exc:
            raise BadRow(line_no, f"missing key {exc.args[0]!r}") from None
        out.append(
            ProbabilityVector(
                sample_id=sample_id,
                backend_id=backend_id,
                variant_id=variant_id,
                probs=_validated_probs(values, line_no),
            )
        )
    return out


def vector_to_row(vector: ProbabilityVector) -> dict:
    return {
        "sample_id": vector.sample_id,
        "backend_id": vector.backend_id,
        "variant_id": vector.variant_id,
        "probs": list(vector.probs),
    }


def write_backend_outputs(vectors: Iterable[ProbabilityVector], path: str | Path) -> int:
    return jsonl.write_lines(path, (vector_to_row(v) for v in vectors))


def request_prediction(
    descriptor: BackendDescriptor,
    prompt: PromptArtifact,
    tta_variant: TtaVariant | None = None,
    image_ref: str | None = None,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> ProbabilityVector:
    """POST one prompt (and optional TTA variant) to a remote backend.

    Network failures are retried with exponential backoff (3 attempts,
    250 ms initial); a non-200 status or malformed body is a ProtocolError
    and is not retried.
    """
    if descriptor.mode != "remote":
        raise ValueError(f"backend {descriptor.backend_id!r} is not remote")
    variant_id = tta_variant.variant_id if tta_variant is not None else "identity"
    body: dict = {
        "sample_id": prompt.sample_id,
        "prompt": prompt.text,
        "variant_id": variant_id,
    }
    if tta_variant is not None and tta_variant.crop_params is not None:
        body["crop"] = list(tta_variant.crop_params)
    if image_ref is not None:
        body["image_ref"] = image_ref

    url = descriptor.location.rstrip("/") + "/predict"
    delay = BACKOFF_INITIAL_S
    response = None
    for attempt in range(MAX_ATTEMPTS):
        try:
            response = requests.post(url, json=body, timeout=timeout)
            break
        except (requests.ConnectionError, requests.Timeout):
            if attempt == MAX_ATTEMPTS - 1:
                raise Timeout(url, MAX_ATTEMPTS) from None
            time.sleep(delay)
            delay *= 2
    if response.status_code != 200:
        raise ProtocolError(response.status_code, response.text[:200])
    try:
        payload = response.json()
        values = payload["probs"]
    except Exception:
        raise ProtocolError(response.status_code, "response body is not {probs: [...]}") from None
    try:
        probs = _validated_probs(values, 0)
    except BadRow as exc:
        raise ProtocolError(response.status_code, str(exc)) from None
    return ProbabilityVector(
        sample_id=prompt.sample_id,
        backend_id=descriptor.backend_id,
        variant_id=variant_id,
        probs=probs,
    )


def request_many(
    descriptor: BackendDescriptor,
    items: Sequence[tuple[PromptArtifact, TtaVariant | None, str | None]],
    max_in_flight: int = DEFAULT_IN_FLIGHT,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> list[ProbabilityVector]:
    """Issue requests concurrently; results come back in input order."""
    if not items:
        return []
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [
            pool.submit(request_prediction, descriptor, prompt, variant, image_ref, timeout)
            for prompt, variant, image_ref in items
        ]
        return [f.result() for f in futures]


def wait_ready(base_url: str, timeout: float = 10.0, interval: float = 0.1) -> bool:
    """Poll GET /healthz until it answers 200 or the timeout elapses."""
    url = base_url.rstrip("/") + "/healthz"
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            if requests.get(url, timeout=interval + 1.0).status_code == 200:
                return True
        except (requests.ConnectionError, requests.Timeout):
            pass
        time.sleep(interval)
    return False
