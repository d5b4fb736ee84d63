"""Exception types raised across the engine.

Every error carries enough context (id, line number, byte offset, field
name) to point at the offending input without re-reading the file.
"""

from __future__ import annotations


class EcspError(Exception):
    """Base class for all engine errors."""


class UnknownEmotion(EcspError):
    """A label string is not one of the nine canonical class names."""

    def __init__(self, name: str):
        super().__init__(f"unknown emotion name: {name!r}")
        self.name = name


class ValidationError(EcspError):
    """A record or value violates an invariant; names the first bad field."""

    def __init__(self, field: str, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"invalid field {field!r}{detail}")
        self.field = field


class ParseError(EcspError):
    """A text input file could not be parsed at the given line."""

    def __init__(self, line: int, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"parse error at line {line}{detail}")
        self.line = line


class DuplicateId(EcspError):
    def __init__(self, id: str):
        super().__init__(f"duplicate id: {id!r}")
        self.id = id


class DimensionMismatch(EcspError):
    def __init__(self, id: str = "", message: str = ""):
        detail = message or "embedding dimensions do not match"
        where = f" (id {id!r})" if id else ""
        super().__init__(f"{detail}{where}")
        self.id = id


class CorruptFile(EcspError):
    """A packed binary file is malformed at the given byte offset."""

    def __init__(self, offset: int, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"corrupt file at offset {offset}{detail}")
        self.offset = offset


class ZeroVector(EcspError):
    def __init__(self, id: str = ""):
        where = f" (id {id!r})" if id else ""
        super().__init__(f"zero-norm vector{where}")
        self.id = id


class UnlabeledPoolRecord(EcspError):
    """A retrieval pool record lacks a gold label or is not a train record."""

    def __init__(self, id: str, message: str = ""):
        detail = message or "pool record must be split=train with a gold label"
        super().__init__(f"{detail} (id {id!r})")
        self.id = id


class EmptyPool(EcspError):
    def __init__(self):
        super().__init__("retrieval pool is empty")


class MissingLanguageIndex(EcspError):
    def __init__(self, language: str):
        super().__init__(f"no index for language {language!r}")
        self.language = language


class EmptyAfterExclusion(EcspError):
    def __init__(self, language: str):
        super().__init__(f"index for language {language!r} is empty after exclusion")
        self.language = language


class IdMismatch(EcspError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"id mismatch: expected {expected!r}, got {got!r}")
        self.expected = expected
        self.got = got


class InvalidSize(EcspError):
    def __init__(self, message: str):
        super().__init__(message)


class ShapeMismatch(EcspError):
    def __init__(self, message: str):
        super().__init__(message)


class CropOutOfBounds(EcspError):
    def __init__(self, message: str):
        super().__init__(message)


class MixedSample(EcspError):
    """Vectors with different (sample, backend) keys in one aggregation."""

    def __init__(self, message: str):
        super().__init__(message)


class DuplicateVariant(EcspError):
    def __init__(self, variant_id: str):
        super().__init__(f"duplicate TTA variant: {variant_id!r}")
        self.variant_id = variant_id


class MissingBackend(EcspError):
    def __init__(self, backend_id: str, sample_id: str = ""):
        where = f" for sample {sample_id!r}" if sample_id else ""
        super().__init__(f"missing backend {backend_id!r}{where}")
        self.backend_id = backend_id
        self.sample_id = sample_id


class InvalidVector(EcspError):
    def __init__(self, id: str, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"invalid probability vector {id!r}{detail}")
        self.id = id


class EmptyInput(EcspError):
    def __init__(self, message: str = "empty input"):
        super().__init__(message)


class BadRow(EcspError):
    """A probability JSONL row is malformed."""

    def __init__(self, line: int, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"bad row at line {line}{detail}")
        self.line = line


class NotOnSimplex(EcspError):
    """A probability vector deviates from the simplex beyond tolerance."""

    def __init__(self, line: int = 0, message: str = ""):
        detail = message or "probabilities do not sum to 1"
        where = f" at line {line}" if line else ""
        super().__init__(f"{detail}{where}")
        self.line = line


class Timeout(EcspError):
    """A remote backend did not answer within the retry budget."""

    def __init__(self, url: str, attempts: int):
        super().__init__(f"backend {url} unreachable after {attempts} attempts")
        self.url = url
        self.attempts = attempts


class ProtocolError(EcspError):
    """A remote backend answered with a non-200 status or a malformed body."""

    def __init__(self, status: int, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"backend protocol error (status {status}){detail}")
        self.status = status
