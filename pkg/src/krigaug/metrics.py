"""Evaluation metrics: RMSE, MAE, Pearson R and spatial Pearson R."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, UndefinedCorrelationError


def _pair(truth, pred, min_len=1):
    a = np.asarray(truth, dtype=float).ravel()
    b = np.asarray(pred, dtype=float).ravel()
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape[0]} truths vs {b.shape[0]} predictions")
    if a.shape[0] < min_len:
        raise InputError(f"need at least {min_len} values, got {a.shape[0]}")
    return a, b


def rmse(truth, pred) -> float:
    a, b = _pair(truth, pred)
    d = a - b
    return math.sqrt(float(np.mean(d * d)))


def mae(truth, pred) -> float:
    a, b = _pair(truth, pred)
    return float(np.mean(np.abs(a - b)))


def pearson_r(truth, pred) -> float:
    """Centered correlation; raises when either input is constant."""
    a, b = _pair(truth, pred, min_len=2)
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedCorrelationError("correlation undefined: an input is constant")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def station_means(rows) -> tuple[list, np.ndarray, np.ndarray]:
    """Per-station mean truth and prediction from ``(station_id, truth, pred)`` rows."""
    acc = defaultdict(lambda: [0.0, 0.0, 0])
    for sid, t, p in rows:
        s = acc[sid]
        s[0] += float(t)
        s[1] += float(p)
        s[2] += 1
    ids = sorted(acc)
    mt = np.array([acc[i][0] / acc[i][2] for i in ids])
    mp = np.array([acc[i][1] / acc[i][2] for i in ids])
    return ids, mt, mp


def spatial_pearson_r(rows) -> float:
    """Pearson R between per-station temporal means of truth and prediction."""
    ids, mt, mp = station_means(rows)
    if len(ids) < 2:
        raise UndefinedCorrelationError(f"spatial correlation needs >= 2 stations, got {len(ids)}")
    return pearson_r(mt, mp)


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    pearson_r: float
    spatial_pearson_r: float
    n: int

    FIELDS = ("rmse", "mae", "pearson_r", "spatial_pearson_r", "n")

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list[str]:
        return [repr(getattr(self, f)) for f in self.FIELDS]


#: Hand-computed reference cases as ``(function name, inputs, expected)``.
#: Spatial cases give ``(station_id, truth, pred)`` rows.
FIXTURES = (
    ("rmse", ([0.0, 0.0], [0.0, 0.0]), 0.0),
    ("mae", ([0.0, 0.0], [0.0, 0.0]), 0.0),
    ("rmse", ([0.0, 0.0], [1.0, 1.0]), 1.0),
    ("mae", ([0.0, 0.0], [1.0, 1.0]), 1.0),
    ("rmse", ([0.0, 0.0], [0.0, 2.0]), math.sqrt(2.0)),  # sqrt((0 + 4) / 2)
    ("mae", ([0.0, 0.0], [0.0, 2.0]), 1.0),
    ("mae", ([1.0, 2.0, 3.0, 4.0], [2.0, 0.0, 3.0, 8.0]), 1.75),  # (1 + 2 + 0 + 4) / 4
    ("pearson_r", ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 1.0),
    ("pearson_r", ([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]), 1.0),
    ("pearson_r", ([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]), -1.0),
    ("pearson_r", ([1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]), 0.8),  # 4 / sqrt(5 * 5)
    ("spatial_pearson_r", ([("a", 1.0, 1.0), ("b", 2.0, 2.0), ("c", 3.0, 3.0)],), 1.0),
    ("spatial_pearson_r", ([("a", 5.0, 15.0), ("a", 15.0, 25.0), ("b", 20.0, 10.0)],), -1.0),
)


def evaluate(station_ids, truth, pred) -> EvalReport:
    a, b = _pair(truth, pred)
    if len(station_ids) != a.shape[0]:
        raise InputError("station ids do not match the number of predictions")
    return EvalReport(
        rmse=rmse(a, b),
        mae=mae(a, b),
        pearson_r=pearson_r(a, b),
        spatial_pearson_r=spatial_pearson_r(zip(station_ids, a, b)),
        n=int(a.shape[0]),
    )
