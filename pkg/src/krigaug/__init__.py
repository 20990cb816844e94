"""Ordinary-kriging pseudo-labels for augmenting sparse ground-station data."""

from .errors import (
    DuplicateRecordError,
    InputError,
    InsufficientDataError,
    InsufficientPseudoError,
    KrigAugError,
    ModelInconsistencyError,
    SchemaError,
    SingularSystemError,
    UndefinedCorrelationError,
)
from .kernels import BACKEND
from .spatial import (
    VARIABLES,
    GroundMeasurement,
    Location,
    Snapshot,
    SnapshotEntry,
    StationRecord,
    build_snapshots,
    distance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "VARIABLES",
    "DuplicateRecordError",
    "GroundMeasurement",
    "InputError",
    "InsufficientDataError",
    "InsufficientPseudoError",
    "KrigAugError",
    "Location",
    "ModelInconsistencyError",
    "SchemaError",
    "SingularSystemError",
    "Snapshot",
    "SnapshotEntry",
    "StationRecord",
    "UndefinedCorrelationError",
    "build_snapshots",
    "distance",
]
