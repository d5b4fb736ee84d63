"""Line-oriented JSON helpers shared by every stage interface.

Writers emit compact separators, UTF-8, and `\n` line endings so that
parse -> serialize -> parse is byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import ParseError


def dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_lines(path: str | Path, objs: Iterable[Any]) -> int:
    """Write one JSON object per line; returns the number of lines."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for obj in objs:
            fh.write(dumps(obj))
            fh.write("\n")
            n += 1
    return n


def read_lines(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield (line_number, parsed object); blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield line_no, json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, str(exc)) from None
