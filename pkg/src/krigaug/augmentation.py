"""Candidate filtering, kriged pseudo-labels and augmented training sets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import InputError, InsufficientDataError, InsufficientPseudoError, SingularSystemError
from .kriging import KrigingSystem
from .spatial import VARIABLES, GroundMeasurement, Location, Snapshot, StationRecord, grid_points, pairwise_distances
from .variogram import VariogramModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterConfig:
    """Candidate rules: outside every station's AOI disk, and at least
    ``min_neighbors`` stations within ``neighbor_radius``."""

    aoi_radius: float = 0.01
    neighbor_radius: float = 0.2
    min_neighbors: int = 4

    def __post_init__(self):
        if not (self.aoi_radius > 0 and self.neighbor_radius > 0):
            raise InputError("filter radii must be positive")
        if self.min_neighbors < 1:
            raise InputError("min_neighbors must be >= 1")


@dataclass(frozen=True)
class PseudoSample:
    location: Location
    timestamp: datetime
    measurement: GroundMeasurement
    is_pseudo: bool = True


@dataclass(frozen=True)
class AugmentedRow:
    station_id: str
    location: Location
    timestamp: datetime
    measurement: GroundMeasurement
    is_pseudo: bool

    @property
    def pm25_label(self) -> float:
        return self.measurement.pm25

    @classmethod
    def labeled(cls, rec: StationRecord) -> "AugmentedRow":
        return cls(rec.station_id, rec.location, rec.timestamp, rec.measurement, False)

    @classmethod
    def pseudo(cls, s: PseudoSample) -> "AugmentedRow":
        return cls("", s.location, s.timestamp, s.measurement, True)


@dataclass(frozen=True)
class AugmentedDataset:
    rows: tuple[AugmentedRow, ...]

    @property
    def n_pseudo(self) -> int:
        return sum(r.is_pseudo for r in self.rows)

    def __len__(self):
        return len(self.rows)


def _coords(locs) -> np.ndarray:
    if isinstance(locs, np.ndarray):
        return locs.reshape(-1, 2)
    return np.array([(p.x, p.y) for p in locs], dtype=float).reshape(-1, 2)


def _passes(points: np.ndarray, stations: np.ndarray, config: FilterConfig) -> np.ndarray:
    if stations.shape[0] == 0:
        return np.zeros(points.shape[0], dtype=bool)
    d = pairwise_distances(points, stations)
    outside_aoi = ~np.any(d < config.aoi_radius, axis=1)
    enough = np.count_nonzero(d <= config.neighbor_radius, axis=1) >= config.min_neighbors
    return outside_aoi & enough


def candidate_filter(point: Location, station_locations, config: FilterConfig) -> bool:
    """Whether ``point`` may carry a pseudo-label.

    Distances strictly below ``aoi_radius`` fall inside an AOI; distances up
    to and including ``neighbor_radius`` count as neighbors.
    """
    return bool(_passes(_coords([point]), _coords(station_locations), config)[0])


def generate_candidates(bounding_box, grid_step: float, station_locations, config: FilterConfig) -> list[Location]:
    """Regular-grid points in ``bounding_box`` passing :func:`candidate_filter`.

    ``bounding_box`` is a pair of corner locations (lower-left, upper-right).
    Points are returned row-major: y outer, x inner.
    """
    lo, hi = bounding_box
    if not grid_step > 0:
        raise InputError("grid_step must be positive")
    if not (hi.x > lo.x and hi.y > lo.y):
        raise InputError("bounding box is degenerate")
    pts = grid_points((lo.x, lo.y, hi.x, hi.y), grid_step)
    keep = _passes(pts, _coords(station_locations), config)
    return [Location(float(x), float(y)) for x, y in pts[keep]]


def generate_pseudo_labels(snapshot: Snapshot, models: dict[str, VariogramModel], candidates) -> list[PseudoSample]:
    """Kriging-mean pseudo-measurements for every candidate of one snapshot.

    All four variables are kriged with their own model. Candidates whose
    solve fails are skipped with a logged warning.
    """
    missing = [v for v in VARIABLES if v not in models]
    if missing:
        raise InputError(f"no variogram model for {missing}")
    if not snapshot.stations:
        raise InsufficientDataError("snapshot has no stations")
    if len(candidates) == 0:
        return []
    targets = _coords(candidates)
    n = targets.shape[0]
    ok = np.ones(n, dtype=bool)
    means = np.zeros((n, len(VARIABLES)))
    coords = snapshot.coords()
    for j, var in enumerate(VARIABLES):
        try:
            system = KrigingSystem(coords, models[var])
        except SingularSystemError as exc:
            log.warning("%s: skipping all %d candidates for %s: %s", snapshot.timestamp.isoformat(), n, var, exc)
            return []
        mean, _, _, _ = system.predict(targets, snapshot.values(var))
        bad = ~np.isfinite(mean)
        for i in np.flatnonzero(bad & ok):
            log.warning("%s: skipping candidate %d (%s): non-finite kriging mean", snapshot.timestamp.isoformat(), i, var)
        ok &= ~bad
        means[:, j] = mean

    out = []
    for i in np.flatnonzero(ok):
        pm25, slp, t, rh = means[i]
        # kriging may undershoot the physical range; clamp to it
        meas = GroundMeasurement(max(pm25, 0.0), slp, t, min(max(rh, 0.0), 100.0))
        out.append(PseudoSample(Location(float(targets[i, 0]), float(targets[i, 1])), snapshot.timestamp, meas))
    return out


def augment_dataset(labeled, pseudo: list[PseudoSample], k: int, seed: int) -> AugmentedDataset:
    """All labeled rows followed by ``k`` pseudo rows drawn uniformly without
    replacement (in pool order)."""
    if k < 0:
        raise InputError("k must be non-negative")
    if k > len(pseudo):
        raise InsufficientPseudoError(
            f"requested {k} pseudo-labeled rows but only {len(pseudo)} are available", available=len(pseudo)
        )
    rows = [r if isinstance(r, AugmentedRow) else AugmentedRow.labeled(r) for r in labeled]
    if k:
        pick = np.sort(np.random.default_rng(seed).choice(len(pseudo), size=k, replace=False))
        rows.extend(AugmentedRow.pseudo(pseudo[i]) for i in pick)
    return AugmentedDataset(tuple(rows))
