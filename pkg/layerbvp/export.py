"""
Deterministic CSV and JSON writers

CSV files start with ``# key=value`` comment lines carrying the run
configuration, followed by a header row and data rows. Values are written
exactly as given, so callers format scalars with their kernel first. JSON
payloads are written with sorted keys and indent 2; non-string scalars that
are not plain ints/bools become decimal strings.

Nothing here writes timestamps: identical inputs give identical files.
"""

import csv
import json
import logging
import pathlib
from typing import Any, Iterable, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)


def _meta_value(value: Any) -> str:
    text = str(value)
    return text.replace("\n", " ")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Optional[Mapping[str, Any]] = None) -> pathlib.Path:
    """Write rows under a commented metadata block and a header row"""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key in sorted(metadata or {}):
            f.write(f"# {key}={_meta_value(metadata[key])}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(v) for v in row])
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def read_csv(path) -> tuple:
    """(metadata, header, rows) of a file written by write_csv, all as strings"""
    metadata = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition("=")
            metadata[key] = value
        else:
            body.append(line)
    parsed = list(csv.reader(body))
    return metadata, parsed[0], parsed[1:]


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if value is None or isinstance(value, (bool, int, str)):
        return value
    # floats and mpf values go out as decimal strings
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_json(path, payload: Mapping[str, Any]) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("wrote %s", path)
    return path
