import numpy as np
import pytest

import krigaug.synth as synth
from krigaug.errors import InputError, ModelInconsistencyError
from krigaug.synth import FieldSampler, SynthConfig, make_scenario, sample_field
from krigaug.variogram import Kind, VariogramModel


def test_counts_single_timestamp():
    sc = make_scenario(SynthConfig(station_count=5, timestamps=1))
    assert len(sc.records) == 5
    assert len(sc.truth_grid) == 1
    assert sc.truth_grid[0].shape == (len(sc.grid), 4)


def test_default_scenario_shape():
    sc = make_scenario(SynthConfig())
    assert len(sc.records) == 40 * 30
    assert len({r.station_id for r in sc.records}) == 40


def test_noise_free_stations_equal_truth():
    sc = make_scenario(SynthConfig(station_count=6, timestamps=3, noise_sd=0.0))
    got = np.array([r.measurement.pm25 for r in sc.records]).reshape(3, 6)
    want = np.array([t[:, 0] for t in sc.truth_stations])
    np.testing.assert_array_equal(got, want)


def test_noise_only_on_pm25():
    sc = make_scenario(SynthConfig(station_count=6, timestamps=2, noise_sd=5.0))
    met = np.array([r.measurement.as_tuple()[1:] for r in sc.records]).reshape(2, 6, 3)
    np.testing.assert_array_equal(met, np.array([t[:, 1:] for t in sc.truth_stations]))


def test_physical_ranges():
    sc = make_scenario(SynthConfig(timestamps=5))
    for t in sc.truth_grid:
        assert np.all(t[:, 0] >= 0)
        assert np.all((t[:, 3] >= 0) & (t[:, 3] <= 100))


def test_scenario_is_deterministic():
    a = make_scenario(SynthConfig(station_count=8, timestamps=2, seed=3))
    b = make_scenario(SynthConfig(station_count=8, timestamps=2, seed=3))
    c = make_scenario(SynthConfig(station_count=8, timestamps=2, seed=4))
    assert a.records == b.records
    assert a.records != c.records


@pytest.mark.parametrize("kw", [dict(station_count=1), dict(timestamps=0), dict(noise_sd=-1.0), dict(box=(0, 0, 0, 1))])
def test_config_validation(kw):
    with pytest.raises(InputError):
        SynthConfig(**kw)


def test_near_perfect_correlation():
    model = VariogramModel(Kind.GAUSSIAN, 0.0, 1.0, 1e-3)
    z = sample_field(model, np.array([[0.0, 0.0], [0.1, 0.0]]), seed=2024)
    assert abs(z[0] - z[1]) < 1e-3


def test_pure_nugget_is_white_noise():
    model = VariogramModel(Kind.EXPONENTIAL, 1.0, 0.0, 1.0)
    pts = np.random.default_rng(0).uniform(size=(2000, 2))
    z = sample_field(model, pts, seed=5)
    assert z.var() == pytest.approx(1.0, rel=0.1)


def test_sampler_deterministic_and_seed_sensitive():
    model = VariogramModel(Kind.SPHERICAL, 0.1, 1.0, 2.0)
    pts = np.random.default_rng(1).uniform(size=(30, 2))
    s = FieldSampler(model, pts)
    np.testing.assert_array_equal(s.sample(9), sample_field(model, pts, 9))
    assert not np.array_equal(s.sample(9), s.sample(10))


def test_sampler_covariance_matches_model():
    model = VariogramModel(Kind.EXPONENTIAL, 0.0, 2.0, 1.0)
    pts = np.array([[0.0, 0.0], [0.5, 0.0]])
    s = FieldSampler(model, pts)
    draws = np.array([s.sample(i) for i in range(4000)])
    cov = np.cov(draws.T)
    assert cov[0, 0] == pytest.approx(2.0, rel=0.08)
    assert cov[0, 1] == pytest.approx(2.0 * np.exp(-0.5), rel=0.1)


def test_indefinite_covariance_raises(monkeypatch):
    # a semivariogram above twice the sill gives negative off-diagonal covariance
    monkeypatch.setattr(synth, "eval_model", lambda m, h: np.where(h > 0, 3.0 * m.sill, 0.0))
    with pytest.raises(ModelInconsistencyError):
        FieldSampler(VariogramModel(Kind.EXPONENTIAL, 0.0, 1.0, 1.0), np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


def test_duplicate_locations_rejected():
    with pytest.raises(InputError):
        FieldSampler(VariogramModel(Kind.EXPONENTIAL, 0.0, 1.0, 1.0), np.zeros((2, 2)))
