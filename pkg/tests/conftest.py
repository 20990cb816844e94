from datetime import datetime, timedelta

import numpy as np
import pytest

from krigaug.spatial import GroundMeasurement, Location, StationRecord
from krigaug.variogram import EmpiricalVariogram

T0 = datetime(2020, 1, 1)


def record(sid, x, y, pm25=10.0, slp=1010.0, t=20.0, rh=50.0, ts=0):
    return StationRecord(sid, Location(x, y), T0 + timedelta(hours=ts), GroundMeasurement(pm25, slp, t, rh))


def empirical(lags, gammas, counts=None):
    """Empirical variogram built directly from bin values."""
    lags = np.asarray(lags, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    counts = np.full(lags.shape, 10, dtype=np.int64) if counts is None else np.asarray(counts)
    half = 0.5 * np.min(np.diff(lags)) if lags.size > 1 else 0.5 * lags[0]
    return EmpiricalVariogram(lags, gammas, counts, lags - half, lags + half, lags + half)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()
CRITERIA = {
    1: "kriging exactness",
    2: "unit-sum weights",
    3: "BLUE oracle equivalence",
    4: "redundancy property",
    5: "variogram round-trip",
    6: "field consistency",
    7: "metric fixtures",
    8: "directional pseudo-label sweep",
    9: "determinism",
}


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records an acceptance outcome and asserts it."""

    def record(n, ok, detail=""):
        request.config.stash[ACCEPTANCE][n] = (bool(ok), detail)
        assert ok, f"criterion {n} ({CRITERIA[n]}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in results:
            terminalreporter.write_line(f"criterion {n} NOT RUN: {title} (deselected or errored before reporting)")
            continue
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
