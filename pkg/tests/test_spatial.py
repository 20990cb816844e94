import math
from datetime import datetime

import numpy as np
import pytest

from conftest import record
from krigaug.errors import DuplicateRecordError, InputError
from krigaug.spatial import (
    GroundMeasurement,
    Location,
    build_snapshots,
    distance,
    flatten_snapshots,
    grid_points,
    pairwise_distances,
)


@pytest.mark.parametrize(
    "a, b, d",
    [((0, 0), (3, 4), 5.0), ((1, 1), (1, 1), 0.0), ((0, 0), (0, 0.2), 0.2)],
)
def test_distance_examples(a, b, d):
    assert distance(Location(*a), Location(*b)) == pytest.approx(d, abs=1e-15)


def test_distance_symmetric():
    a, b = Location(0.3, -1.2), Location(2.5, 7.0)
    assert distance(a, b) == distance(b, a)


def test_pairwise_matches_scalar(rng):
    a = rng.uniform(size=(6, 2))
    b = rng.uniform(size=(4, 2))
    d = pairwise_distances(a, b)
    for i in range(6):
        for j in range(4):
            assert d[i, j] == pytest.approx(math.hypot(*(a[i] - b[j])), abs=1e-14)


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_location_rejects_non_finite(bad):
    with pytest.raises(InputError):
        Location(bad, 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(pm25=-1.0), dict(rh=101.0), dict(rh=-0.5), dict(t=math.nan)],
)
def test_measurement_validation(kwargs):
    base = dict(pm25=10.0, slp=1000.0, t=20.0, rh=50.0)
    base.update(kwargs)
    with pytest.raises(InputError):
        GroundMeasurement(**base)


def test_grouping_by_timestamp():
    recs = [record(s, x, 0.0, ts=t) for t in range(3) for s, x in (("a", 0.0), ("b", 1.0))]
    snaps = build_snapshots(recs)
    assert len(snaps) == 3
    assert all(len(s.stations) == 2 for s in snaps)
    assert [s.timestamp for s in snaps] == sorted(s.timestamp for s in snaps)


def test_colocated_stations_merge_by_mean():
    snaps = build_snapshots([record("a", 0.5, 0.5, pm25=10.0), record("b", 0.5, 0.5, pm25=20.0)])
    (entry,) = snaps[0].stations
    assert entry.measurement.pm25 == 15.0
    assert entry.station_id == "a+b"


def test_empty_input():
    assert build_snapshots([]) == []


def test_exact_duplicate_collapses_conflict_raises():
    r = record("a", 0.0, 0.0)
    assert len(build_snapshots([r, r])[0].stations) == 1
    with pytest.raises(DuplicateRecordError):
        build_snapshots([r, record("a", 0.0, 0.0, pm25=11.0)])


def test_flatten_round_trip():
    recs = [record(s, x, 0.0, pm25=float(t), ts=t) for t in range(2) for s, x in (("a", 0.0), ("b", 1.0))]
    assert sorted(flatten_snapshots(build_snapshots(recs)), key=lambda r: (r.timestamp, r.station_id)) == recs


def test_snapshot_accessors():
    snap = build_snapshots([record("b", 1.0, 2.0, t=5.0), record("a", 3.0, 4.0, t=7.0)])[0]
    assert [e.station_id for e in snap.stations] == ["a", "b"]
    np.testing.assert_array_equal(snap.coords(), [[3.0, 4.0], [1.0, 2.0]])
    np.testing.assert_array_equal(snap.values("t"), [7.0, 5.0])


def test_grid_points_row_major():
    pts = grid_points((0.0, 0.0, 1.0, 0.5), 0.5)
    np.testing.assert_allclose(pts, [[0, 0], [0.5, 0], [1, 0], [0, 0.5], [0.5, 0.5], [1, 0.5]])


def test_grid_step_larger_than_box():
    np.testing.assert_array_equal(grid_points((0.0, 0.0, 1.0, 1.0), 5.0), [[0.0, 0.0]])


def test_timestamps_are_datetimes():
    snap = build_snapshots([record("a", 0, 0)])[0]
    assert isinstance(snap.timestamp, datetime)
