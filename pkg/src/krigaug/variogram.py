"""Semivariogram models, empirical estimation and least-squares fitting.

The three isotropic models share the parameterization nugget ``tau2``,
partial sill ``sigma2`` and range rate ``phi`` (range ``1/phi``); all of
them evaluate to exactly 0 at ``h = 0`` and jump to at least the nugget
for ``h > 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import least_squares

from . import kernels
from .errors import InputError, InsufficientDataError
from .spatial import Location, Snapshot

log = logging.getLogger(__name__)

DEFAULT_N_BINS = 15


class Kind(str, Enum):
    EXPONENTIAL = "exponential"
    SPHERICAL = "spherical"
    GAUSSIAN = "gaussian"


#: tie-break order for model selection
KIND_ORDER = (Kind.EXPONENTIAL, Kind.SPHERICAL, Kind.GAUSSIAN)


@dataclass(frozen=True)
class VariogramModel:
    kind: Kind
    nugget: float
    partial_sill: float
    range_rate: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not (math.isfinite(self.nugget) and self.nugget >= 0):
            raise InputError(f"nugget must be >= 0, got {self.nugget}")
        if not (math.isfinite(self.partial_sill) and self.partial_sill >= 0):
            raise InputError(f"partial_sill must be >= 0, got {self.partial_sill}")
        if not (math.isfinite(self.range_rate) and self.range_rate > 0):
            raise InputError(f"range_rate must be > 0, got {self.range_rate}")

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    @property
    def range(self) -> float:
        return 1.0 / self.range_rate

    def __call__(self, h):
        return eval_model(self, h)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "nugget": self.nugget,
            "partial_sill": self.partial_sill,
            "range_rate": self.range_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VariogramModel":
        return cls(Kind(d["kind"]), float(d["nugget"]), float(d["partial_sill"]), float(d["range_rate"]))


def _shape(kind: Kind, phi: float, h: np.ndarray) -> np.ndarray:
    """Normalized structured component on h > 0 (0 at the origin, 1 at the sill)."""
    if kind is Kind.EXPONENTIAL:
        return 1.0 - np.exp(-phi * h)
    if kind is Kind.GAUSSIAN:
        return 1.0 - np.exp(-(phi * phi) * (h * h))
    u = phi * h
    return np.where(u >= 1.0, 1.0, 1.5 * u - 0.5 * u**3)


def eval_model(model: VariogramModel, h):
    """Evaluate the semivariogram at separation(s) ``h`` (scalar or array)."""
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0):
        raise InputError("separation distance must be non-negative")
    out = np.where(arr > 0, model.nugget + model.partial_sill * _shape(model.kind, model.range_rate, arr), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned method-of-moments semivariogram.

    ``bin_edges`` holds the upper edge of every bin; the first bin starts at
    0 (exclusive). Only non-empty bins appear in ``lag``/``gamma``/``count``;
    ``lower``/``upper`` record each retained bin's interval.
    """

    lag: np.ndarray
    gamma: np.ndarray
    count: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    bin_edges: np.ndarray

    @property
    def n_bins(self) -> int:
        return int(self.lag.shape[0])

    @property
    def bins(self) -> list[tuple[float, float, int]]:
        return list(zip(self.lag.tolist(), self.gamma.tolist(), self.count.tolist()))


def _check_edges(edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float).ravel()
    if edges.size == 0:
        raise InputError("need at least one bin edge")
    if not np.all(np.isfinite(edges)) or edges[0] <= 0 or np.any(np.diff(edges) <= 0):
        raise InputError("bin edges must be finite, positive and strictly increasing")
    return edges


def default_bin_edges(coords, n_bins: int = DEFAULT_N_BINS) -> np.ndarray:
    """``n_bins`` equal-width bins from 0 to half the maximum pairwise distance."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if coords.shape[0] < 2:
        raise InsufficientDataError("need at least 2 points to define lag bins")
    dx = coords[:, None, 0] - coords[None, :, 0]
    dy = coords[:, None, 1] - coords[None, :, 1]
    dmax = float(np.sqrt(dx * dx + dy * dy).max())
    if dmax <= 0:
        raise InsufficientDataError("all points coincide")
    return np.linspace(0.0, 0.5 * dmax, n_bins + 1)[1:]


def _from_sums(sums, counts, edges) -> EmpiricalVariogram:
    keep = counts > 0
    lower = np.concatenate(([0.0], edges[:-1]))
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = sums / (2.0 * counts)
    return EmpiricalVariogram(
        lag=0.5 * (lower + edges)[keep],
        gamma=gamma[keep],
        count=counts[keep],
        lower=lower[keep],
        upper=edges[keep],
        bin_edges=edges,
    )


def empirical_semivariogram(points, values, bin_edges=None) -> EmpiricalVariogram:
    """Empirical semivariogram of one set of scattered values.

    ``points`` is a list of :class:`Location` or an (n, 2) array.
    """
    coords = _coords(points)
    values = np.asarray(values, dtype=float).ravel()
    if coords.shape[0] != values.shape[0]:
        raise InputError("points and values differ in length")
    if coords.shape[0] < 2:
        raise InsufficientDataError("empirical semivariogram needs at least 2 points")
    edges = default_bin_edges(coords) if bin_edges is None else _check_edges(bin_edges)
    sums, counts = kernels.pair_bin_sums(coords[:, 0], coords[:, 1], values, edges)
    return _from_sums(sums, counts, edges)


def pooled_semivariogram(snapshots: list[Snapshot], variable: str, bin_edges=None) -> EmpiricalVariogram:
    """Empirical semivariogram pooling within-timestamp pairs over snapshots.

    Default bins are derived from the union of all station locations.
    """
    usable = [s for s in snapshots if len(s.stations) >= 2]
    if not usable:
        raise InsufficientDataError("need a snapshot with at least 2 stations")
    if bin_edges is None:
        all_coords = np.unique(np.vstack([s.coords() for s in usable]), axis=0)
        edges = default_bin_edges(all_coords)
    else:
        edges = _check_edges(bin_edges)
    sums = np.zeros(edges.shape[0])
    counts = np.zeros(edges.shape[0], dtype=np.int64)
    for snap in usable:
        c = snap.coords()
        s, n = kernels.pair_bin_sums(c[:, 0], c[:, 1], snap.values(variable), edges)
        sums += s
        counts += n
    return _from_sums(sums, counts, edges)


def _coords(points) -> np.ndarray:
    if len(points) and isinstance(points[0], Location):
        return np.array([(p.x, p.y) for p in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(-1, 2)


def fit_rmse(empirical: EmpiricalVariogram, model: VariogramModel) -> float:
    """Root-mean-square gap between binned and model semivariance."""
    if empirical.n_bins < 1:
        raise InsufficientDataError("empirical variogram has no bins")
    r = empirical.gamma - eval_model(model, empirical.lag)
    return float(np.sqrt(np.mean(r * r)))


@dataclass(frozen=True)
class FitResult:
    model: VariogramModel
    fit_rmse: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {**self.model.to_dict(), "fit_rmse": self.fit_rmse, "degenerate": self.degenerate}


# starting points: (nugget fraction of max gamma, partial-sill fraction, phi * max_lag)
_STARTS = tuple(
    (nug, 1.0 - nug, phil)
    for nug in (0.0, 0.3)
    for phil in (0.5, 1.5, 4.0, 12.0)
)


def fit_model(empirical: EmpiricalVariogram, kind) -> FitResult:
    """Least-squares fit of one model kind to the binned semivariance.

    Minimizes the unweighted per-bin RMSE from a fixed set of eight starts
    inside the box nugget, partial sill in ``[0, 2 max(gamma)]`` and
    ``phi`` in ``[0.1, 100] / max_lag``; the best start wins (first on ties),
    so the result is deterministic.
    """
    kind = Kind(kind)
    if empirical.n_bins < 3:
        raise InsufficientDataError(f"model fit needs >= 3 bins, got {empirical.n_bins}")
    lag = empirical.lag
    gamma = empirical.gamma
    max_lag = float(lag.max())
    scale = float(gamma.max())
    phi_lo, phi_hi = 0.1 / max_lag, 100.0 / max_lag

    if scale <= 0:
        model = VariogramModel(kind, 0.0, 0.0, 1.0 / max_lag)
        log.warning("degenerate variogram fit (%s): all binned semivariances are zero", kind.value)
        return FitResult(model, fit_rmse(empirical, model), degenerate=True)

    g = gamma / scale
    log_lo, log_hi = math.log(phi_lo), math.log(phi_hi)

    def unpack(p):
        return VariogramModel(kind, p[0] * scale, p[1] * scale, math.exp(p[2]))

    def residuals(p):
        return p[0] + p[1] * _shape(kind, math.exp(p[2]), lag) - g

    best = None
    improved = False
    for nug, psill, phil in _STARTS:
        x0 = np.array([nug, psill, min(max(math.log(phil / max_lag), log_lo), log_hi)])
        r0 = float(np.sum(residuals(x0) ** 2))
        try:
            sol = least_squares(
                residuals,
                x0,
                bounds=([0.0, 0.0, log_lo], [2.0, 2.0, log_hi]),
                method="trf",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=2000,
            )
            x, cost = sol.x, 2.0 * sol.cost
        except (ValueError, FloatingPointError):
            x, cost = x0, r0
        if cost < r0:
            improved = True
        if best is None or cost < best[1]:
            best = (x, cost)
    model = unpack(best[0])
    if not improved:
        log.warning("degenerate variogram fit (%s): no start improved", kind.value)
    return FitResult(model, fit_rmse(empirical, model), degenerate=not improved)


def fit_all(empirical: EmpiricalVariogram) -> dict[Kind, FitResult]:
    return {k: fit_model(empirical, k) for k in KIND_ORDER}


def select_best_model(empirical: EmpiricalVariogram, fits: dict | None = None) -> FitResult:
    """Lowest-RMSE fit over the three kinds; ties go exponential, spherical, gaussian."""
    fits = fit_all(empirical) if fits is None else fits
    best = None
    for k in KIND_ORDER:
        if best is None or fits[k].fit_rmse < best.fit_rmse:
            best = fits[k]
    return best
