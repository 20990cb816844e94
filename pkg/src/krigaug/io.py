"""CSV and JSON formats.

Station CSV::

    station_id,timestamp,x,y,pm25,slp,t,rh

Truth-grid CSV::

    timestamp,x,y,pm25,slp,t,rh

Augmented CSV is the station layout plus a trailing ``is_pseudo`` (0/1)
column; pseudo rows leave ``station_id`` empty. Timestamps are ISO-8601 and
floats are written with ``repr`` so that files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime
from pathlib import Path

import numpy as np

from .augmentation import AugmentedDataset, AugmentedRow
from .errors import InputError, KrigAugError, SchemaError
from .spatial import VARIABLES, GroundMeasurement, Location, StationRecord

STATION_COLUMNS = ("station_id", "timestamp", "x", "y") + VARIABLES
TRUTH_COLUMNS = ("timestamp", "x", "y") + VARIABLES
AUGMENTED_COLUMNS = STATION_COLUMNS + ("is_pseudo",)


class OutputError(KrigAugError, OSError):
    code = "io"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def open_for_write(path):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_csv(path, header, rows) -> int:
    n = 0
    with open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
            n += 1
    return n


def _read_rows(path, required, optional=()):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _float(path, lineno, row, col):
    try:
        return float(row[col])
    except (TypeError, ValueError):
        raise SchemaError(f"{path}:{lineno}: column {col} is not a number: {row[col]!r}") from None


def _timestamp(path, lineno, raw):
    try:
        return datetime.fromisoformat(raw)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}:{lineno}: bad ISO-8601 timestamp {raw!r}") from None


def _record(path, lineno, row, require_id=True):
    sid = (row.get("station_id") or "").strip()
    if require_id and not sid:
        raise SchemaError(f"{path}:{lineno}: empty station_id")
    try:
        loc = Location(_float(path, lineno, row, "x"), _float(path, lineno, row, "y"))
        meas = GroundMeasurement(*(_float(path, lineno, row, v) for v in VARIABLES))
    except SchemaError:
        raise
    except InputError as exc:
        raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return sid, loc, _timestamp(path, lineno, row["timestamp"]), meas


def read_station_csv(path) -> list[StationRecord]:
    out = []
    for lineno, row in _read_rows(path, STATION_COLUMNS):
        sid, loc, ts, meas = _record(path, lineno, row)
        out.append(StationRecord(sid, loc, ts, meas))
    return out


def read_training_csv(path) -> list[AugmentedRow]:
    """Station or augmented CSV as rows; ``is_pseudo`` defaults to 0."""
    out = []
    for lineno, row in _read_rows(path, ("timestamp", "x", "y") + VARIABLES):
        flag = (row.get("is_pseudo") or "0").strip()
        if flag not in ("0", "1"):
            raise SchemaError(f"{path}:{lineno}: is_pseudo must be 0 or 1, got {flag!r}")
        sid, loc, ts, meas = _record(path, lineno, row, require_id=False)
        out.append(AugmentedRow(sid, loc, ts, meas, flag == "1"))
    return out


def station_rows(records):
    for r in records:
        m = r.measurement
        yield (r.station_id, r.timestamp.isoformat(), r.location.x, r.location.y, m.pm25, m.slp, m.t, m.rh)


def write_station_csv(path, records) -> int:
    return write_csv(path, STATION_COLUMNS, station_rows(records))


def write_augmented_csv(path, dataset: AugmentedDataset) -> int:
    def rows():
        for r in dataset.rows:
            m = r.measurement
            yield (r.station_id, r.timestamp.isoformat(), r.location.x, r.location.y, m.pm25, m.slp, m.t, m.rh, r.is_pseudo)

    return write_csv(path, AUGMENTED_COLUMNS, rows())


def write_truth_csv(path, timestamps, grid, truth_grid) -> int:
    def rows():
        for ts, vals in zip(timestamps, truth_grid):
            iso = ts.isoformat()
            for (x, y), v in zip(grid, vals):
                yield (iso, x, y, *v)

    return write_csv(path, TRUTH_COLUMNS, rows())


def write_json(path, obj) -> None:
    with open_for_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc

