"""
Atomic artifact writers. Files are written to a temporary sibling and renamed into place,
so a failed run never leaves a half-written artifact behind.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_json(path: Path, document: Any) -> Path:
    """Write a pydantic model or plain JSON value; floats keep their shortest round-trip repr"""
    if isinstance(document, BaseModel):
        text = document.model_dump_json(indent=2)
    else:
        text = json.dumps(document, indent=2)
    return atomic_write_text(path, text + "\n")


def format_float(value: float) -> str:
    return repr(float(value))


def write_numeric_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """CSV of numeric rows; floats are written losslessly"""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")
