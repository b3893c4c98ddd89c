"""Deterministic, atomic artifact writers."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError

FLOAT_FMT = "%.16e"


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, csv_text(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV file") from None
        return header, [row for row in reader]


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``x, u, v, w`` columns (extra columns ignored)."""
    header, rows = read_csv(path)
    cols = {name.strip(): i for i, name in enumerate(header)}
    missing = [c for c in ("x", "u", "v", "w") if c not in cols]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    try:
        arr = np.array([[float(r[cols[c]]) for c in ("x", "u", "v", "w")] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed row ({exc})") from None
    if arr.size == 0:
        raise ValidationError(f"{path}: no data rows")
    return arr[:, 0], arr[:, 1:].T.copy()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, json_text(obj))
