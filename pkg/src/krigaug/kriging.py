"""Ordinary kriging in semivariogram form, plus inverse-distance weighting
as the redundancy-blind baseline.

For stations ``s_1..s_m`` the weights ``alpha`` and Lagrange multiplier
``mu`` solve::

    [ Gamma  1 ] [alpha]   [gamma_0]
    [ 1^T    0 ] [ mu  ] = [   1   ]

with ``Gamma_ij = gamma(|s_i - s_j|)`` and ``gamma_0,i = gamma(|s_i - s_0|)``.
The prediction is ``alpha^T y`` and the kriging variance
``alpha^T gamma_0 + mu``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, InsufficientDataError, KrigAugError, SingularSystemError
from .spatial import VARIABLES, Location, Snapshot, pairwise_distances
from .variogram import VariogramModel, eval_model

#: condition-number ceiling for the augmented system
MAX_CONDITION = 1e12
#: stations closer than this are treated as coincident
MIN_SEPARATION = 1e-9


@dataclass(frozen=True)
class KrigingPrediction:
    mean: float
    variance: float
    weights: np.ndarray
    lagrange: float


def _as_coords(locs) -> np.ndarray:
    if not isinstance(locs, np.ndarray) and len(locs) and isinstance(locs[0], Location):
        return np.array([(p.x, p.y) for p in locs], dtype=float).reshape(-1, 2)
    return np.asarray(locs, dtype=float).reshape(-1, 2)


class KrigingSystem:
    """Factorized ordinary-kriging system for a fixed station layout.

    The augmented matrix is LU-factorized once; any number of targets and
    value vectors can then be solved against it.
    """

    def __init__(self, coords, model: VariogramModel):
        coords = _as_coords(coords)
        m = coords.shape[0]
        if m < 1:
            raise InsufficientDataError("ordinary kriging needs at least one station")
        self.coords = coords
        self.model = model
        d = pairwise_distances(coords, coords)
        if m > 1:
            off = d[~np.eye(m, dtype=bool)]
            if off.min() < MIN_SEPARATION:
                i, j = np.argwhere((d < MIN_SEPARATION) & ~np.eye(m, dtype=bool))[0]
                raise SingularSystemError(
                    f"stations {i} and {j} are closer than {MIN_SEPARATION:g} "
                    f"({coords[i].tolist()} vs {coords[j].tolist()})"
                )
        A = np.empty((m + 1, m + 1))
        A[:m, :m] = eval_model(model, d)
        A[:m, m] = 1.0
        A[m, :m] = 1.0
        A[m, m] = 0.0
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularSystemError(
                f"kriging system for {m} stations with {model.kind.value} model "
                f"(nugget={model.nugget:g}, partial_sill={model.partial_sill:g}, "
                f"range_rate={model.range_rate:g}) is ill-conditioned (cond={cond:.3g})"
            )
        self.matrix = A
        self.condition = float(cond)
        self._lu = scipy.linalg.lu_factor(A, check_finite=False)

    @property
    def n_stations(self) -> int:
        return self.coords.shape[0]

    def solve(self, targets):
        """Weights (n_targets, m), multipliers and gamma_0 for the targets."""
        t = _as_coords(targets)
        m = self.n_stations
        g0 = eval_model(self.model, pairwise_distances(self.coords, t))
        rhs = np.empty((m + 1, t.shape[0]))
        rhs[:m] = g0
        rhs[m] = 1.0
        sol = scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)
        return sol[:m].T, sol[m], g0.T

    def predict(self, targets, values):
        """Kriging means and variances of ``values`` at ``targets``."""
        values = np.asarray(values, dtype=float).ravel()
        if values.shape[0] != self.n_stations:
            raise InputError("values do not match the station count")
        w, mu, g0 = self.solve(targets)
        mean = w @ values
        var = np.maximum(np.einsum("ij,ij->i", w, g0) + mu, 0.0)
        return mean, var, w, mu


def solve_ordinary_kriging(stations, model: VariogramModel, target: Location) -> KrigingPrediction:
    """Ordinary-kriging prediction at one target from ``(Location, value)`` pairs."""
    if not stations:
        raise InsufficientDataError("ordinary kriging needs at least one station")
    system = KrigingSystem([loc for loc, _ in stations], model)
    values = [v for _, v in stations]
    mean, var, w, mu = system.predict([target], values)
    return KrigingPrediction(float(mean[0]), float(var[0]), w[0], float(mu[0]))


class TargetKrigingError(KrigAugError):
    """A solver failure tagged with the target it occurred at."""

    code = "singular_system"

    def __init__(self, index, cause):
        super().__init__(f"target {index}: {cause}")
        self.index = index
        self.cause = cause


def krige_field(snapshot: Snapshot, variable: str, model: VariogramModel, targets) -> list[KrigingPrediction]:
    """Krige one snapshot variable at every target, preserving target order.

    The system is factorized once but each target is solved on its own, so
    results are bit-identical to per-target :func:`solve_ordinary_kriging`.
    """
    if variable not in VARIABLES:
        raise InputError(f"unknown variable {variable!r}")
    if not snapshot.stations:
        raise InsufficientDataError("snapshot has no stations")
    if len(targets) == 0:
        raise InputError("no targets given")
    try:
        system = KrigingSystem(snapshot.coords(), model)
    except SingularSystemError as exc:
        raise TargetKrigingError(0, exc) from exc
    values = snapshot.values(variable)
    out = []
    for i, t in enumerate(_as_coords(targets)):
        mean, var, w, mu = system.predict(t[None, :], values)
        if not (np.isfinite(mean[0]) and np.all(np.isfinite(w[0]))):
            raise TargetKrigingError(i, "non-finite solution")
        out.append(KrigingPrediction(float(mean[0]), float(var[0]), w[0], float(mu[0])))
    return out


def idw_weights(coords, target, beta: float) -> np.ndarray:
    """Normalized inverse-power weights ``1/h**beta``.

    A target coinciding with a station puts all weight on that station.
    """
    if beta <= 0:
        raise InputError("beta must be positive")
    c = _as_coords(coords)
    if c.shape[0] < 1:
        raise InsufficientDataError("IDW needs at least one station")
    h = pairwise_distances(c, _as_coords([target]) if isinstance(target, Location) else target)[:, 0]
    hit = np.flatnonzero(h == 0.0)
    if hit.size:
        w = np.zeros_like(h)
        w[hit[0]] = 1.0
        return w
    raw = h ** (-beta)
    return raw / raw.sum()


def idw_predict(stations, target: Location, beta: float = 2.0) -> float:
    """Inverse-distance-weighted estimate at ``target`` from ``(Location, value)`` pairs."""
    if not stations:
        raise InsufficientDataError("IDW needs at least one station")
    w = idw_weights([loc for loc, _ in stations], target, beta)
    return float(w @ np.array([v for _, v in stations], dtype=float))
