"""End-to-end stages shared by the CLI: variogram fitting per variable,
pseudo-label pools, model training and the pseudo-count sweep.

Seeds for one experiment descend from the master seed as::

    derive_seed(master, "repeat", r, "split")      station holdout
    derive_seed(master, "repeat", r, "augment", k) pseudo-row sampling
    derive_seed(master, "repeat", r, "forest")     forest trees

so every (k, repeat) cell can be recomputed on its own. The holdout and
forest seed of a repeat are shared by all pseudo counts.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .augmentation import (
    AugmentedRow,
    FilterConfig,
    PseudoSample,
    augment_dataset,
    generate_candidates,
    generate_pseudo_labels,
)
from .errors import InputError, InsufficientDataError, KrigAugError
from .metrics import EvalReport, evaluate
from .predictor import RESIDUAL_FACTORIES, ForestParams, KNNRegressor, JointModel, joint_fit, joint_predict
from .seeding import derive_seed
from .spatial import VARIABLES, Location, Snapshot, StationRecord, build_snapshots
from .variogram import Kind, empirical_semivariogram, fit_all, fit_model, pooled_semivariogram, select_best_model

log = logging.getLogger(__name__)


def parse_kind(kind) -> Kind | str:
    """``"auto"`` or a :class:`Kind`; anything else is an input error."""
    if kind == "auto" or isinstance(kind, Kind):
        return kind
    try:
        return Kind(kind)
    except ValueError:
        raise InputError(f"unknown variogram kind {kind!r}; use auto, exponential, spherical or gaussian") from None


def fit_variograms(snapshots: list[Snapshot], kind="auto", variables=VARIABLES) -> dict[str, dict]:
    """Per-variable pooled empirical variogram and fits.

    Returns ``{variable: {"empirical": ..., "fits": {kind: FitResult}, "selected": FitResult}}``;
    with ``kind="auto"`` all three kinds are fit and the best is selected,
    otherwise only the requested kind.
    """
    kind = parse_kind(kind)
    out = {}
    for var in variables:
        emp = pooled_semivariogram(snapshots, var)
        if kind == "auto":
            fits = fit_all(emp)
            selected = select_best_model(emp, fits)
        else:
            res = fit_model(emp, kind)
            fits = {res.model.kind: res}
            selected = res
        out[var] = {"empirical": emp, "fits": fits, "selected": selected}
    return out


SCOPES = ("global", "per-timestamp")


def _fit_one(emp, kind):
    if kind == "auto":
        return select_best_model(emp)
    return fit_model(emp, parse_kind(kind))


def variogram_models(snapshots: list[Snapshot], kind="auto", scope="global") -> dict:
    """Kriging models for pseudo-labelling.

    ``scope="global"`` fits one model per variable on the semivariogram
    pooled over all timestamps and returns ``{variable: model}``;
    ``"per-timestamp"`` fits every snapshot separately and returns
    ``{timestamp: {variable: model}}``.
    """
    if scope == "global":
        fits = fit_variograms(snapshots, kind)
        return {v: fits[v]["selected"].model for v in VARIABLES}
    if scope != "per-timestamp":
        raise InputError(f"variogram scope must be one of {SCOPES}, got {scope!r}")
    out = {}
    for snap in snapshots:
        if len(snap.stations) < 2:
            continue
        c = snap.coords()
        out[snap.timestamp] = {v: _fit_one(empirical_semivariogram(c, snap.values(v)), kind).model for v in VARIABLES}
    return out


def bounding_box(locations, pad: float = 0.0) -> tuple[Location, Location]:
    xs = [p.x for p in locations]
    ys = [p.y for p in locations]
    return Location(min(xs) - pad, min(ys) - pad), Location(max(xs) + pad, max(ys) + pad)


def station_locations(records) -> dict[str, Location]:
    out = {}
    for r in records:
        out.setdefault(r.station_id, r.location)
    return out


def pseudo_pool(snapshots: list[Snapshot], models: dict, filter_config: FilterConfig, grid_step: float, bbox=None) -> list[PseudoSample]:
    """Pseudo-labels for every snapshot at that snapshot's candidate points,
    ordered by timestamp then row-major grid position.

    ``models`` is either ``{variable: model}`` or, as produced by the
    per-timestamp scope, ``{timestamp: {variable: model}}``.
    """
    per_ts = not any(v in models for v in VARIABLES)
    pool = []
    for snap in snapshots:
        snap_models = models.get(snap.timestamp) if per_ts else models
        if snap_models is None:
            continue
        locs = snap.locations()
        box = bbox or bounding_box(locs)
        if not (box[1].x > box[0].x and box[1].y > box[0].y):
            continue
        cands = generate_candidates(box, grid_step, locs, filter_config)
        if len(snap.stations) < filter_config.min_neighbors or not cands:
            continue
        pool.extend(generate_pseudo_labels(snap, snap_models, cands))
    return pool


def features(rows) -> tuple[np.ndarray, np.ndarray]:
    """(slp, t, rh, x, y) matrix and pm25 labels."""
    X = np.array([(r.measurement.slp, r.measurement.t, r.measurement.rh, r.location.x, r.location.y) for r in rows], dtype=float)
    y = np.array([r.measurement.pm25 for r in rows], dtype=float)
    return X.reshape(-1, 5), y


def train_model(rows, forest: ForestParams, residual: str = "knn", residual_k: int = 5, seed: int = 0, n_jobs: int = 1) -> JointModel:
    X, y = features(rows)
    if residual == "knn":
        factory = lambda: KNNRegressor(k=residual_k)  # noqa: E731
    elif residual in RESIDUAL_FACTORIES:
        factory = RESIDUAL_FACTORIES[residual]
    else:
        raise InputError(f"unknown residual regressor {residual!r}")
    return joint_fit(X, y, forest, factory, seed=seed, n_jobs=n_jobs)


def evaluate_model(model: JointModel, rows) -> EvalReport:
    ids = [r.station_id for r in rows]
    if any(not s for s in ids):
        raise InputError("evaluation rows need station ids")
    X, y = features(rows)
    return evaluate(ids, y, joint_predict(model, X))


def split_stations(station_ids, test_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded station-level holdout; returns sorted (train, test) id lists."""
    ids = sorted(set(station_ids))
    if len(ids) < 2:
        raise InsufficientDataError("need at least 2 stations to hold any out")
    n_test = min(len(ids) - 1, max(1, int(round(test_fraction * len(ids)))))
    perm = np.random.default_rng(seed).permutation(len(ids))
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(ids[i] for i in perm[n_test:])
    return train, test


@dataclass(frozen=True)
class ExperimentConfig:
    pseudo_counts: tuple[int, ...] = (0, 200, 400)
    repeats: int = 10
    seed: int = 0
    test_fraction: float = 0.2
    filter: FilterConfig = field(default_factory=FilterConfig)
    grid_step: float = 0.02
    variogram_kind: str = "auto"
    variogram_scope: str = "global"
    forest: ForestParams = field(default_factory=ForestParams)
    residual: str = "knn"
    residual_k: int = 5
    n_jobs: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise InputError("repeat count must be >= 1")
        if not self.pseudo_counts or any(k < 0 for k in self.pseudo_counts):
            raise InputError("pseudo-count list must be nonempty and nonnegative")
        if not 0 < self.test_fraction < 1:
            raise InputError("test_fraction must lie in (0, 1)")
        if self.variogram_scope not in SCOPES:
            raise InputError(f"variogram scope must be one of {SCOPES}")
        parse_kind(self.variogram_kind)


@dataclass(frozen=True)
class RunResult:
    k: int
    repeat: int
    report: EvalReport | None
    error: str | None = None


def run_repeat(records: list[StationRecord], config: ExperimentConfig, repeat: int) -> list[RunResult]:
    """All pseudo counts for one repeat, sharing its holdout and pool.

    A failure at one pseudo count is recorded as that cell's result; setup
    failures (split, variograms, pool) propagate.
    """
    train_ids, test_ids = split_stations(
        [r.station_id for r in records], config.test_fraction, derive_seed(config.seed, "repeat", repeat, "split")
    )
    train_set = set(train_ids)
    train = [r for r in records if r.station_id in train_set]
    test = [r for r in records if r.station_id not in train_set]
    snaps = build_snapshots(train)
    models = variogram_models(snaps, config.variogram_kind, config.variogram_scope)
    box = bounding_box(list(station_locations(records).values()))
    pool = pseudo_pool(snaps, models, config.filter, config.grid_step, box)
    labeled = [AugmentedRow.labeled(r) for r in train]

    out = []
    for k in config.pseudo_counts:
        try:
            data = augment_dataset(labeled, pool, k, derive_seed(config.seed, "repeat", repeat, "augment", k))
            model = train_model(
                data.rows,
                config.forest,
                config.residual,
                config.residual_k,
                seed=derive_seed(config.seed, "repeat", repeat, "forest"),
            )
            out.append(RunResult(k, repeat, evaluate_model(model, test)))
        except KrigAugError as exc:
            log.error("repeat %d, k=%d failed: %s", repeat, k, exc)
            out.append(RunResult(k, repeat, None, _describe(exc)))
    return out


def _describe(exc) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_experiment(records: list[StationRecord], config: ExperimentConfig) -> list[RunResult]:
    """Every (k, repeat) cell, ordered by k then repeat.

    Repeats run on ``config.n_jobs`` threads; the output order and values do
    not depend on it. Failed cells carry ``report=None`` and an error string;
    the remaining cells still run.
    """

    def one(r):
        try:
            return run_repeat(records, config, r)
        except Exception as exc:  # recorded as failure rows by the caller
            log.error("repeat %d failed: %s", r, exc)
            return [RunResult(k, r, None, _describe(exc)) for k in config.pseudo_counts]

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as ex:
            per_repeat = list(ex.map(one, range(config.repeats)))
    else:
        per_repeat = [one(r) for r in range(config.repeats)]
    order = {k: i for i, k in enumerate(config.pseudo_counts)}
    flat = [res for rep in per_repeat for res in rep]
    flat.sort(key=lambda x: (order[x.k], x.repeat))
    return flat


METRICS = ("rmse", "mae", "pearson_r", "spatial_pearson_r")


def summarize(results: list[RunResult], pseudo_counts) -> list[dict]:
    """Mean and sample standard deviation of each metric per pseudo count."""
    table = []
    for k in pseudo_counts:
        ok = [r.report for r in results if r.k == k and r.report is not None]
        row = {"k": k, "n_runs": len(ok)}
        for m in METRICS:
            vals = np.array([getattr(rep, m) for rep in ok], dtype=float)
            row[f"{m}_mean"] = float(vals.mean()) if vals.size else math.nan
            row[f"{m}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        table.append(row)
    return table
