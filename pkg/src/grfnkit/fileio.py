"""Deterministic serialization and atomic file output."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def dump_json(obj) -> str:
    """Serialize with a stable layout.

    Dict insertion order is preserved (callers build dicts in a fixed
    order), floats use repr, and the result ends with a newline so the
    files diff cleanly.
    """
    return json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename.

    An interrupted run leaves either the previous file or the new one,
    never a truncated mix.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
