"""JSONL reading/writing and atomic file output."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SchemaError


def dumps_line(obj: dict) -> str:
    # keys stay in insertion order; callers build dicts in their fixed field order
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "), allow_nan=False)


@contextlib.contextmanager
def atomic_open(path: str | Path, mode: str = "w"):
    """Write to a temp file beside ``path`` and rename over it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": "\n"}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with atomic_open(path) as fh:
        for rec in records:
            fh.write(dumps_line(rec))
            fh.write("\n")


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)``; blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno, path=str(path)) from exc
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object", line=lineno, path=str(path))
            yield lineno, obj
