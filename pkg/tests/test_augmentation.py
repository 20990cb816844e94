import math

import numpy as np
import pytest

from conftest import record
from krigaug.augmentation import (
    AugmentedRow,
    FilterConfig,
    PseudoSample,
    augment_dataset,
    candidate_filter,
    generate_candidates,
    generate_pseudo_labels,
)
from krigaug.errors import InputError, InsufficientPseudoError
from krigaug.kriging import solve_ordinary_kriging
from krigaug.spatial import VARIABLES, GroundMeasurement, Location, build_snapshots
from krigaug.variogram import Kind, VariogramModel

CFG = FilterConfig(aoi_radius=0.01, neighbor_radius=0.2, min_neighbors=4)
MODELS = {v: VariogramModel(Kind.EXPONENTIAL, 0.0, 1.0, 2.0) for v in VARIABLES}


def ring(n, r, cx=0.5, cy=0.5):
    return [Location(cx + r * math.cos(2 * math.pi * i / n), cy + r * math.sin(2 * math.pi * i / n)) for i in range(n)]


def test_inside_aoi_rejected():
    stations = [Location(0.005, 0.0)] + ring(6, 0.1, 0.0, 0.0)
    assert not candidate_filter(Location(0.0, 0.0), stations, CFG)


def test_four_neighbors_accepted():
    assert candidate_filter(Location(0.5, 0.5), ring(4, 0.15), CFG)


def test_three_neighbors_rejected():
    assert not candidate_filter(Location(0.5, 0.5), ring(3, 0.15) + [Location(0.9, 0.9)], CFG)


def test_neighbor_radius_inclusive_aoi_exclusive():
    stations = ring(4, 0.2, 0.0, 0.0)
    assert candidate_filter(Location(0.0, 0.0), stations, FilterConfig(0.2, 0.2, 4)) is True


def test_no_stations_no_candidates():
    assert generate_candidates((Location(0, 0), Location(1, 1)), 0.1, [], CFG) == []


def test_ring_candidates_match_hand_rule():
    stations = ring(12, 0.1)
    cfg = FilterConfig(aoi_radius=0.001, neighbor_radius=0.2, min_neighbors=4)
    got = generate_candidates((Location(0, 0), Location(1, 1)), 0.05, stations, cfg)
    want = []
    for j in range(21):
        for i in range(21):
            p = (i * 0.05, j * 0.05)
            d = [math.hypot(p[0] - s.x, p[1] - s.y) for s in stations]
            if min(d) >= 0.001 and sum(x <= 0.2 for x in d) >= 4:
                want.append(p)
    assert [(round(p.x, 9), round(p.y, 9)) for p in got] == [(round(x, 9), round(y, 9)) for x, y in want]
    assert Location(0.5, 0.5) in got


def test_step_larger_than_box():
    got = generate_candidates((Location(0, 0), Location(1, 1)), 10.0, ring(5, 0.05, 0.0, 0.0), CFG)
    assert got == [Location(0.0, 0.0)]


def test_candidates_validate_inputs():
    with pytest.raises(InputError):
        generate_candidates((Location(0, 0), Location(1, 1)), 0.0, [], CFG)
    with pytest.raises(InputError):
        FilterConfig(aoi_radius=0.0)


def _snap(points, meas):
    return build_snapshots([record(f"s{i}", x, y, *m) for i, ((x, y), m) in enumerate(zip(points, meas))])[0]


def test_constant_snapshot_constant_labels():
    pts = [(0.1, 0.1), (0.9, 0.2), (0.5, 0.8), (0.3, 0.6)]
    snap = _snap(pts, [(12.0, 1005.0, 21.0, 40.0)] * 4)
    out = generate_pseudo_labels(snap, MODELS, [Location(0.5, 0.5), Location(2.0, 2.0)])
    for s in out:
        assert s.measurement.as_tuple() == pytest.approx((12.0, 1005.0, 21.0, 40.0), abs=1e-9)
        assert s.is_pseudo


def test_equidistant_candidate_averages():
    snap = _snap([(0.0, 0.0), (1.0, 0.0)], [(10.0, 1000.0, 20.0, 30.0), (20.0, 1010.0, 30.0, 50.0)])
    (s,) = generate_pseudo_labels(snap, MODELS, [Location(0.5, 0.3)])
    assert s.measurement.as_tuple() == pytest.approx((15.0, 1005.0, 25.0, 40.0), abs=1e-9)


def test_pseudo_labels_match_independent_solves():
    rng = np.random.default_rng(8)
    pts = rng.uniform(size=(5, 2)).tolist()
    meas = [(float(rng.uniform(20, 80)), float(rng.uniform(1000, 1020)), float(rng.uniform(15, 30)), float(rng.uniform(30, 70))) for _ in pts]
    models = {
        "pm25": VariogramModel(Kind.EXPONENTIAL, 1.0, 50.0, 3.0),
        "slp": VariogramModel(Kind.GAUSSIAN, 0.1, 4.0, 2.0),
        "t": VariogramModel(Kind.SPHERICAL, 0.2, 3.0, 1.5),
        "rh": VariogramModel(Kind.EXPONENTIAL, 2.0, 60.0, 4.0),
    }
    cands = [Location(0.2, 0.3), Location(0.6, 0.6), Location(0.9, 0.1)]
    out = generate_pseudo_labels(_snap(pts, meas), models, cands)
    assert [s.location for s in out] == cands
    for s, c in zip(out, cands):
        for j, v in enumerate(VARIABLES):
            want = solve_ordinary_kriging([(Location(*p), m[j]) for p, m in zip(pts, meas)], models[v], c).mean
            assert s.measurement.get(v) == pytest.approx(want, abs=1e-9)


def test_missing_model_rejected():
    snap = _snap([(0.0, 0.0)], [(1.0, 1000.0, 20.0, 50.0)])
    with pytest.raises(InputError):
        generate_pseudo_labels(snap, {"pm25": MODELS["pm25"]}, [Location(1, 1)])


def _pool(n):
    return [PseudoSample(Location(float(i), 0.0), record("x", 0, 0).timestamp, GroundMeasurement(float(i), 1000.0, 20.0, 50.0)) for i in range(n)]


def test_k_zero_is_labeled_only():
    labeled = [record("a", 0, 0), record("b", 1, 1)]
    data = augment_dataset(labeled, _pool(5), 0, seed=1)
    assert data.rows == tuple(AugmentedRow.labeled(r) for r in labeled)
    assert data.n_pseudo == 0


def test_k_all_includes_every_pseudo():
    data = augment_dataset([record("a", 0, 0)], _pool(7), 7, seed=1)
    assert sorted(r.measurement.pm25 for r in data.rows if r.is_pseudo) == [float(i) for i in range(7)]
    assert all(r.station_id == "" for r in data.rows if r.is_pseudo)


def test_augment_deterministic_and_ordered():
    a = augment_dataset([record("a", 0, 0)], _pool(50), 10, seed=3)
    b = augment_dataset([record("a", 0, 0)], _pool(50), 10, seed=3)
    assert a == b
    xs = [r.location.x for r in a.rows if r.is_pseudo]
    assert xs == sorted(xs) and len(set(xs)) == 10


def test_k_too_large_reports_available():
    with pytest.raises(InsufficientPseudoError) as ei:
        augment_dataset([record("a", 0, 0)], _pool(3), 4, seed=0)
    assert ei.value.available == 3
