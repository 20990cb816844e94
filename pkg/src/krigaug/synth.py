"""Synthetic ground truth: Gaussian random fields with prescribed
semivariograms, sampled at stations and on a dense evaluation grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import InputError, ModelInconsistencyError
from .seeding import derive_seed, rng_for
from .spatial import VARIABLES, GroundMeasurement, Location, StationRecord, grid_points, pairwise_distances
from .variogram import Kind, VariogramModel, eval_model

#: negative eigenvalues down to this fraction of the largest are clamped to 0
EIGEN_CLAMP = 1e-10


class FieldSampler:
    """Zero-mean Gaussian process sampler on a fixed set of locations.

    The covariance ``C(h) = sill - gamma(h)`` (``C(0) = sill``) is
    eigendecomposed once; each draw is ``V @ (sqrt(lambda) * z)`` with
    ``z`` standard normal from ``numpy.random.default_rng(seed)``.
    """

    def __init__(self, model: VariogramModel, locations):
        coords = np.array([(p.x, p.y) for p in locations], dtype=float) if (
            len(locations) and isinstance(locations[0], Location)
        ) else np.asarray(locations, dtype=float).reshape(-1, 2)
        if coords.shape[0] == 0:
            raise InputError("no locations to sample")
        if np.unique(coords, axis=0).shape[0] != coords.shape[0]:
            raise InputError("sampling locations must be distinct")
        cov = model.sill - eval_model(model, pairwise_distances(coords, coords))
        lam, vec = np.linalg.eigh(cov)
        top = max(float(lam.max()), 0.0)
        if lam.min() < -EIGEN_CLAMP * top:
            raise ModelInconsistencyError(
                f"covariance of {model.kind.value} model is indefinite (min eigenvalue {lam.min():.3g})"
            )
        self.model = model
        self.coords = coords
        self._factor = vec * np.sqrt(np.clip(lam, 0.0, None))

    def sample(self, seed: int) -> np.ndarray:
        z = np.random.default_rng(seed).standard_normal(self._factor.shape[1])
        return self._factor @ z


def sample_field(model: VariogramModel, locations, seed: int) -> np.ndarray:
    """One zero-mean Gaussian-process draw at ``locations``."""
    return FieldSampler(model, locations).sample(seed)


def _exp(psill, rng_len):
    return VariogramModel(Kind.EXPONENTIAL, 0.0, psill, 1.0 / rng_len)


@dataclass(frozen=True)
class SynthConfig:
    """Scenario parameters.

    Each variable gets a fresh field per timestamp (``variograms``) around
    ``means``, plus a domain-wide offset per timestamp with standard
    deviation ``temporal_sd[v]``. PM2.5 additionally depends linearly on the
    meteorological anomalies (``pm25_coupling``) and may carry a
    time-invariant spatial pattern (``pm25_static``, None by default).
    ``noise_sd`` is Gaussian measurement noise added to station PM2.5 only.
    """

    station_count: int = 40
    timestamps: int = 30
    seed: int = 0
    noise_sd: float = 2.0
    box: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    truth_step: float = 0.05
    variograms: dict = field(
        default_factory=lambda: {
            "pm25": _exp(4.0, 0.25),
            "slp": _exp(4.0, 0.5),
            "t": _exp(9.0, 0.4),
            "rh": _exp(100.0, 0.3),
        }
    )
    means: dict = field(default_factory=lambda: {"pm25": 100.0, "slp": 1010.0, "t": 25.0, "rh": 60.0})
    pm25_static: VariogramModel | None = None
    pm25_coupling: dict = field(default_factory=lambda: {"slp": -3.0, "t": 4.0, "rh": 1.0})
    temporal_sd: dict = field(default_factory=lambda: {"slp": 2.0, "t": 2.0, "rh": 5.0})
    start: datetime = datetime(2018, 1, 1)
    time_step: timedelta = timedelta(days=1)

    def __post_init__(self):
        if self.station_count < 2:
            raise InputError(f"station_count must be >= 2, got {self.station_count}")
        if self.timestamps < 1:
            raise InputError(f"timestamps must be >= 1, got {self.timestamps}")
        if not self.noise_sd >= 0:
            raise InputError(f"noise_sd must be >= 0, got {self.noise_sd}")
        x0, y0, x1, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise InputError(f"degenerate box {self.box}")
        if not self.truth_step > 0:
            raise InputError("truth_step must be positive")
        missing = [v for v in VARIABLES if v not in self.variograms or v not in self.means]
        if missing:
            raise InputError(f"missing variogram or mean for {missing}")


@dataclass(frozen=True)
class Scenario:
    records: list[StationRecord]
    station_coords: np.ndarray
    station_ids: list[str]
    grid: np.ndarray
    timestamps: list[datetime]
    #: per timestamp, an (n_grid, 4) array of pm25, slp, t, rh
    truth_grid: list[np.ndarray]
    #: per timestamp, an (n_stations, 4) noise-free array
    truth_stations: list[np.ndarray]


def make_scenario(config: SynthConfig) -> Scenario:
    x0, y0, x1, y1 = config.box
    rng = rng_for(config.seed, "stations")
    n = config.station_count
    stations = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    grid = grid_points(config.box, config.truth_step)
    pts = np.vstack([stations, grid])
    samplers = {v: FieldSampler(config.variograms[v], pts) for v in VARIABLES}
    static = (
        FieldSampler(config.pm25_static, pts).sample(derive_seed(config.seed, "static", "pm25"))
        if config.pm25_static is not None
        else np.zeros(pts.shape[0])
    )
    width = len(str(n - 1))
    ids = [f"S{i:0{width}d}" for i in range(n)]
    times = [config.start + i * config.time_step for i in range(config.timestamps)]

    records = []
    truth_grid = []
    truth_stations = []
    for ti, ts in enumerate(times):
        shift = rng_for(config.seed, "temporal", ti).standard_normal(len(VARIABLES))
        f = {
            v: config.means[v] + config.temporal_sd.get(v, 0.0) * shift[j]
            + samplers[v].sample(derive_seed(config.seed, "field", v, ti))
            for j, v in enumerate(VARIABLES)
        }
        f["rh"] = np.clip(f["rh"], 0.0, 100.0)
        pm = config.means["pm25"] + (f["pm25"] - config.means["pm25"]) + static
        for v, c in config.pm25_coupling.items():
            pm = pm + c * (f[v] - config.means[v])
        f["pm25"] = np.clip(pm, 0.0, None)
        truth = np.column_stack([f[v] for v in VARIABLES])
        truth_stations.append(truth[:n])
        truth_grid.append(truth[n:])
        noise = rng_for(config.seed, "noise", ti).normal(0.0, 1.0, n) * config.noise_sd
        for i in range(n):
            pm25 = max(truth[i, 0] + noise[i], 0.0)
            records.append(
                StationRecord(
                    ids[i],
                    Location(float(stations[i, 0]), float(stations[i, 1])),
                    ts,
                    GroundMeasurement(float(pm25), float(truth[i, 1]), float(truth[i, 2]), float(truth[i, 3])),
                )
            )
    return Scenario(records, stations, ids, grid, times, truth_grid, truth_stations)
