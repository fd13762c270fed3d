"""CSV helpers shared by every writer: schema comment line, NA markers, atomic rename."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

NA = "NA"


def format_float(value) -> str:
    if value is None:
        return NA
    value = float(value)
    if math.isnan(value):
        return NA
    return repr(value)


def parse_float(text: str) -> float:
    text = text.strip()
    return math.nan if text in (NA, "") else float(text)


@contextmanager
def atomic_text(path):
    """Yield a text handle whose content replaces ``path`` only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@contextmanager
def atomic_csv(path, schema: str):
    """Yield a csv writer; the file starts with ``# <schema>``."""
    with atomic_text(path) as fh:
        fh.write(f"# {schema}\n")
        yield csv.writer(fh, lineterminator="\n")


def read_csv_rows(path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))
