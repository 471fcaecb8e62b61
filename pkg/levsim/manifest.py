"""
Output files: CSV series, JSON documents and the run manifest.

CSV numbers are written with ``repr(float(value))``, which round-trips
exactly and never depends on the locale.
"""

import csv
import json
import logging
import math
import os

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IoError, ParseError

__all__ = [
    "RunManifest",
    "write_csv",
    "write_json",
    "read_csv",
    "manifest_path",
]

logger = logging.getLogger(__name__)


def _cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _parent(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise IoError(f"cannot create {path.parent}: {error.strerror or error}")
    return path


def write_csv(path, columns):
    """Write equal-length ``columns`` (name -> sequence) with a header row."""
    path = _parent(path)
    names = list(columns)
    data = [np.atleast_1d(np.asarray(columns[name])) for name in names]
    lengths = {len(column) for column in data}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream, lineterminator="\r\n")
            writer.writerow(names)
            for row in zip(*data):
                writer.writerow([_cell(value) for value in row])
    except OSError as error:
        raise IoError(f"cannot write {path}: {error.strerror or error}")
    logger.info("wrote %s (%d rows)", path, lengths.pop() if lengths else 0)
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv` back into float columns where
    possible (text columns stay strings)."""
    with open(path, newline="", encoding="utf-8") as stream:
        rows = list(csv.reader(stream))
    header, body = rows[0], rows[1:]
    columns = {}
    for index, name in enumerate(header):
        values = [row[index] for row in body]
        try:
            columns[name] = np.array([float(value) for value in values])
        except ValueError:
            columns[name] = values
    return columns


def _jsonable(value):
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, os.PathLike):
        return os.fspath(value)
    return value


def write_json(path, document):
    path = _parent(path)
    try:
        with open(path, "w", encoding="utf-8") as stream:
            json.dump(_jsonable(document), stream, indent=2, sort_keys=True)
            stream.write("\n")
    except OSError as error:
        raise IoError(f"cannot write {path}: {error.strerror or error}")
    logger.info("wrote %s", path)
    return path


def manifest_path(out):
    """``<out>.manifest.json`` next to a file output, ``manifest.json`` inside
    a directory output."""
    out = Path(out)
    if out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


@dataclass
class RunManifest:
    """Everything needed to run a job again.

    ``argv`` is the command line as parsed; ``config`` the resolved config
    snapshot (angular units) or None for jobs that only use bundled presets.
    """

    subcommand: str
    argv: list
    version: str
    config: Optional[dict] = None
    seeds: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    duration: float = 0.0

    def write(self, path):
        return write_json(path, asdict(self))

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as stream:
                document = json.load(stream)
        except OSError as error:
            raise IoError(f"cannot read {path}: {error.strerror or error}")
        except json.JSONDecodeError as error:
            raise ParseError(f"{path}: {error}") from error
        try:
            return cls(**document)
        except TypeError as error:
            raise ParseError(f"{path}: not a run manifest ({error})") from error
