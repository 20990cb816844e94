"""Spatial data model: locations, ground measurements, station records and
per-timestamp snapshots.

Coordinates are planar and unit-agnostic; all radii elsewhere in the
package are expressed in the same raw coordinate units.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import DuplicateRecordError, InputError

VARIABLES = ("pm25", "slp", "t", "rh")


@dataclass(frozen=True, slots=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InputError(f"non-finite coordinate ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class GroundMeasurement:
    """PM2.5 (ug/m3) with sea-level pressure (hPa), temperature (C) and
    relative humidity (%)."""

    pm25: float
    slp: float
    t: float
    rh: float

    def __post_init__(self):
        for name in VARIABLES:
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"non-finite {name}: {getattr(self, name)}")
        if self.pm25 < 0:
            raise InputError(f"negative pm25: {self.pm25}")
        if not 0.0 <= self.rh <= 100.0:
            raise InputError(f"rh outside [0, 100]: {self.rh}")

    def get(self, variable: str) -> float:
        if variable not in VARIABLES:
            raise InputError(f"unknown variable {variable!r}")
        return getattr(self, variable)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.pm25, self.slp, self.t, self.rh)


@dataclass(frozen=True, slots=True)
class StationRecord:
    station_id: str
    location: Location
    timestamp: datetime
    measurement: GroundMeasurement


@dataclass(frozen=True, slots=True)
class SnapshotEntry:
    station_id: str
    location: Location
    measurement: GroundMeasurement


@dataclass(frozen=True, slots=True)
class Snapshot:
    timestamp: datetime
    stations: tuple[SnapshotEntry, ...]

    def locations(self) -> list[Location]:
        return [e.location for e in self.stations]

    def coords(self) -> np.ndarray:
        """(n, 2) array of station coordinates."""
        return np.array([(e.location.x, e.location.y) for e in self.stations], dtype=float).reshape(-1, 2)

    def values(self, variable: str) -> np.ndarray:
        return np.array([e.measurement.get(variable) for e in self.stations], dtype=float)

    def records(self) -> list[StationRecord]:
        return [StationRecord(e.station_id, e.location, self.timestamp, e.measurement) for e in self.stations]


def distance(a: Location, b: Location) -> float:
    """Euclidean distance between two planar locations."""
    dx = a.x - b.x
    dy = a.y - b.y
    return math.sqrt(dx * dx + dy * dy)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between (n, 2) and (m, 2) coordinate arrays."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def grid_points(box, step: float) -> np.ndarray:
    """Row-major (y outer, x inner) regular grid over ``box`` including its
    lower-left corner; points beyond the upper edges are dropped."""
    x0, y0, x1, y1 = box
    nx = int(np.floor((x1 - x0) / step + 1e-9)) + 1
    ny = int(np.floor((y1 - y0) / step + 1e-9)) + 1
    xs = x0 + step * np.arange(nx)
    ys = y0 + step * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _mean_measurement(ms: list[GroundMeasurement]) -> GroundMeasurement:
    n = len(ms)
    return GroundMeasurement(*(sum(m.get(v) for m in ms) / n for v in VARIABLES))


def build_snapshots(records: list[StationRecord]) -> list[Snapshot]:
    """Group records by timestamp into snapshots sorted by time.

    Exact repeats of a (station_id, timestamp) record are collapsed; repeats
    with different content raise :class:`DuplicateRecordError`. Distinct
    stations sharing an identical location at one timestamp are merged into
    a single entry whose measurements are the field-wise mean and whose id
    joins the member ids with ``+``.
    """
    by_time: dict[datetime, dict[str, StationRecord]] = defaultdict(dict)
    for rec in records:
        seen = by_time[rec.timestamp].get(rec.station_id)
        if seen is None:
            by_time[rec.timestamp][rec.station_id] = rec
        elif seen != rec:
            raise DuplicateRecordError(
                f"conflicting records for station {rec.station_id!r} at {rec.timestamp.isoformat()}"
            )

    snapshots = []
    for ts in sorted(by_time):
        by_loc: dict[Location, list[StationRecord]] = defaultdict(list)
        for sid in sorted(by_time[ts]):
            rec = by_time[ts][sid]
            by_loc[rec.location].append(rec)
        entries = []
        for loc, group in by_loc.items():
            if len(group) == 1:
                entries.append(SnapshotEntry(group[0].station_id, loc, group[0].measurement))
            else:
                sid = "+".join(r.station_id for r in group)
                entries.append(SnapshotEntry(sid, loc, _mean_measurement([r.measurement for r in group])))
        entries.sort(key=lambda e: e.station_id)
        snapshots.append(Snapshot(ts, tuple(entries)))
    return snapshots


def flatten_snapshots(snapshots: list[Snapshot]) -> list[StationRecord]:
    return [rec for snap in snapshots for rec in snap.records()]
