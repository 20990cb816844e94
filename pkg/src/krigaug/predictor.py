"""Two-stage PM2.5 regressor: a random forest on meteorological attributes
followed by a residual learner fit to ``y - y_rf``.

Features are laid out as ``(slp, t, rh, x, y)``. By default the forest only
sees the first three columns; the residual stage (k-nearest neighbours on
the coordinates unless another factory is supplied) sees the rest.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import kernels
from .errors import InputError, InsufficientDataError
from .seeding import derive_seed

FEATURES = ("slp", "t", "rh", "x", "y")
MET_COLUMNS = (0, 1, 2)
COORD_COLUMNS = (3, 4)


@dataclass(frozen=True, slots=True)
class FeatureRow:
    slp: float
    t: float
    rh: float
    x: float
    y: float


def feature_matrix(rows) -> np.ndarray:
    """(n, 5) float array from FeatureRows or anything array-like."""
    if len(rows) and isinstance(rows[0], FeatureRow):
        X = np.array([(r.slp, r.t, r.rh, r.x, r.y) for r in rows], dtype=float)
    else:
        X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or (X.shape[0] and X.shape[1] != len(FEATURES)):
        raise InputError(f"feature rows must have {len(FEATURES)} columns {FEATURES}")
    if not np.all(np.isfinite(X)):
        raise InputError("feature rows contain non-finite values")
    return X


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = 12
    min_leaf: int = 2
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True
    feature_mask: tuple[int, ...] = MET_COLUMNS

    def __post_init__(self):
        if self.n_trees < 1:
            raise InputError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InputError("max_depth must be >= 0 or None")
        if self.min_leaf < 1:
            raise InputError("min_leaf must be >= 1")
        if not self.feature_mask or any(not 0 <= c < len(FEATURES) for c in self.feature_mask):
            raise InputError(f"feature_mask must index into {FEATURES}")
        object.__setattr__(self, "feature_mask", tuple(int(c) for c in self.feature_mask))

    def resolved_max_features(self) -> int:
        d = len(self.feature_mask)
        mf = self.max_features
        if mf is None or mf == "all":
            return d
        if mf == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        mf = int(mf)
        if not 1 <= mf <= d:
            raise InputError(f"max_features must lie in [1, {d}]")
        return mf

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "feature_mask": list(self.feature_mask),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls(
            n_trees=int(d["n_trees"]),
            max_depth=None if d["max_depth"] is None else int(d["max_depth"]),
            min_leaf=int(d["min_leaf"]),
            max_features=d["max_features"],
            bootstrap=bool(d["bootstrap"]),
            feature_mask=tuple(d["feature_mask"]),
        )


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class ForestModel:
    params: ForestParams
    seed: int
    trees: tuple[Tree, ...]
    _packed: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.trees:
            raise InputError("a forest needs at least one tree")
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees]).astype(np.int64)
        packed = tuple(np.concatenate([getattr(t, a) for t in self.trees]) for a in ("feature", "threshold", "left", "right", "value"))
        object.__setattr__(self, "_packed", packed + (offsets,))

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "seed": self.seed, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(ForestParams.from_dict(d["params"]), int(d["seed"]), tuple(Tree.from_dict(t) for t in d["trees"]))


def _fit_tree(X, y, params: ForestParams, max_features: int, seed: int, i: int) -> Tree:
    rng = np.random.default_rng(derive_seed(seed, "tree", i))
    n = X.shape[0]
    if params.bootstrap:
        w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
    else:
        w = np.ones(n)
    state = int(rng.integers(0, 2**63))
    depth = -1 if params.max_depth is None else params.max_depth
    return Tree(*kernels.build_tree(X, y, w, depth, params.min_leaf, max_features, state))


def forest_fit(rows, labels, params: ForestParams | None = None, seed: int = 0, n_jobs: int = 1, **overrides) -> ForestModel:
    """Fit a bagged CART regression forest.

    Each tree ``i`` draws its bootstrap and feature-subset stream from
    ``derive_seed(seed, "tree", i)``, so the fitted model does not depend on
    ``n_jobs``. Keyword overrides (``n_trees=...``, ``max_depth=...``) patch
    ``params``.
    """
    params = params or ForestParams()
    if overrides:
        params = ForestParams(**{**params.to_dict(), **overrides})
    X = feature_matrix(rows)
    y = np.asarray(labels, dtype=float).ravel()
    if X.shape[0] == 0:
        raise InsufficientDataError("cannot fit a forest on an empty training set")
    if y.shape[0] != X.shape[0]:
        raise InputError("rows and labels differ in length")
    if not np.all(np.isfinite(y)):
        raise InputError("labels contain non-finite values")
    Xm = np.ascontiguousarray(X[:, params.feature_mask])
    mf = params.resolved_max_features()

    def one(i):
        return _fit_tree(Xm, y, params, mf, seed, i)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            trees = tuple(ex.map(one, range(params.n_trees)))
    else:
        trees = tuple(one(i) for i in range(params.n_trees))
    return ForestModel(params, int(seed), trees)


def forest_predict(model: ForestModel, rows) -> np.ndarray:
    X = feature_matrix(rows)
    if X.shape[0] == 0:
        return np.zeros(0)
    Xm = np.ascontiguousarray(X[:, model.params.feature_mask])
    return kernels.predict_forest(*model._packed, Xm)


class ResidualRegressor(Protocol):
    """Second-stage learner. ``fit`` returns the fitted regressor."""

    def fit(self, X: np.ndarray, residuals: np.ndarray) -> "ResidualRegressor": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict: ...


class ZeroRegressor:
    def fit(self, X, residuals):
        return self

    def predict(self, X):
        return np.zeros(np.asarray(X).shape[0])

    def to_dict(self):
        return {"kind": "zero"}


class ConstantRegressor:
    """Predicts a fixed offset regardless of the training residuals."""

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def fit(self, X, residuals):
        return self

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.value)

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


class KNNRegressor:
    """Mean residual of the ``k`` nearest training rows in the selected
    columns (coordinates by default). Distance ties resolve to the earlier
    training row."""

    def __init__(self, k: int = 5, columns: tuple[int, ...] = COORD_COLUMNS):
        if k < 1:
            raise InputError("k must be >= 1")
        self.k = int(k)
        self.columns = tuple(int(c) for c in columns)
        self._X = None
        self._r = None

    def fit(self, X, residuals):
        X = np.asarray(X, dtype=float)
        self._X = np.ascontiguousarray(X[:, self.columns])
        self._r = np.asarray(residuals, dtype=float).ravel().copy()
        return self

    def predict(self, X, chunk: int = 2048):
        if self._X is None:
            raise InputError("KNNRegressor used before fit")
        Q = np.asarray(X, dtype=float)[:, self.columns]
        k = min(self.k, self._X.shape[0])
        out = np.empty(Q.shape[0])
        for s in range(0, Q.shape[0], chunk):
            q = Q[s:s + chunk]
            diff = q[:, None, :] - self._X[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[s:s + chunk] = self._r[nn].mean(axis=1)
        return out

    def to_dict(self):
        return {
            "kind": "knn",
            "k": self.k,
            "columns": list(self.columns),
            "train": self._X.tolist() if self._X is not None else None,
            "residuals": self._r.tolist() if self._r is not None else None,
        }


def residual_from_dict(d: dict) -> ResidualRegressor:
    kind = d.get("kind")
    if kind == "zero":
        return ZeroRegressor()
    if kind == "constant":
        return ConstantRegressor(d["value"])
    if kind == "knn":
        reg = KNNRegressor(d["k"], tuple(d["columns"]))
        if d.get("train") is not None:
            reg._X = np.asarray(d["train"], dtype=float).reshape(-1, len(reg.columns))
            reg._r = np.asarray(d["residuals"], dtype=float)
        return reg
    raise InputError(f"unknown residual regressor kind {kind!r}")


RESIDUAL_FACTORIES: dict[str, Callable[[], ResidualRegressor]] = {
    "knn": KNNRegressor,
    "zero": ZeroRegressor,
}


@dataclass(frozen=True, eq=False)
class JointModel:
    forest: ForestModel
    residual: ResidualRegressor

    def to_dict(self) -> dict:
        return {
            "format": "krigaug-joint-model",
            "version": 1,
            "features": list(FEATURES),
            "forest": self.forest.to_dict(),
            "residual": self.residual.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JointModel":
        if d.get("format") != "krigaug-joint-model":
            raise InputError("not a krigaug joint-model document")
        return cls(ForestModel.from_dict(d["forest"]), residual_from_dict(d["residual"]))


def joint_fit(
    rows,
    labels,
    params: ForestParams | None = None,
    residual_factory: Callable[[], ResidualRegressor] = KNNRegressor,
    seed: int = 0,
    n_jobs: int = 1,
) -> JointModel:
    """Fit the forest, then the residual learner on ``labels - forest(rows)``."""
    X = feature_matrix(rows)
    y = np.asarray(labels, dtype=float).ravel()
    forest = forest_fit(X, y, params, seed=seed, n_jobs=n_jobs)
    eps = y - forest_predict(forest, X)
    return JointModel(forest, residual_factory().fit(X, eps))


def joint_predict(model: JointModel, rows) -> np.ndarray:
    X = feature_matrix(rows)
    return forest_predict(model.forest, X) + model.residual.predict(X)
