"""Acceptance suite: one test per criterion, each reported in the
``acceptance criteria`` section of the pytest summary."""

import csv
import time
from pathlib import Path

import numpy as np
import pytest

from krigaug import metrics
from krigaug.cli import main
from krigaug.kriging import KrigingSystem, idw_weights
from krigaug.pipeline import ExperimentConfig, run_experiment, summarize
from krigaug.spatial import Location, build_snapshots
from krigaug.synth import SynthConfig, make_scenario
from krigaug.variogram import KIND_ORDER, Kind, VariogramModel, fit_model, pooled_semivariogram, select_best_model
from conftest import empirical
from oracles import cluster_layout, ok_oracle

GOLDEN = Path(__file__).parent / "golden"


def random_configs(n=100, seed=2024, nugget=False):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        m = int(rng.integers(3, 31))
        kind = KIND_ORDER[int(rng.integers(0, 3))]
        model = VariogramModel(kind, float(rng.uniform(0, 0.5)) if nugget else 0.0, float(rng.uniform(0.5, 5.0)), float(rng.uniform(2.0, 10.0)))
        yield rng.uniform(size=(m, 2)), rng.normal(50, 15, size=m), model, rng


def test_c1_kriging_exactness(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for coords, values, model, _ in random_configs():
        mean, _, _, _ = KrigingSystem(coords, model).predict(coords, values)
        worst = max(worst, float(np.abs(mean - values).max()))
    dt = time.perf_counter() - t0
    criterion(1, worst <= 1e-8 and dt < 5, f"max |error| {worst:.2e}, {dt:.2f} s")


def test_c2_unit_sum_weights(criterion):
    worst = 0.0
    for coords, _, model, rng in random_configs():
        ang = rng.uniform(0, 2 * np.pi, 10)
        far = np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(5, 100, 10)[:, None]
        targets = np.vstack([rng.uniform(-0.2, 1.2, size=(10, 2)), far])
        w, _, _ = KrigingSystem(coords, model).solve(targets)
        worst = max(worst, float(np.abs(w.sum(axis=1) - 1).max()))
    criterion(2, worst <= 1e-10, f"max |sum(w) - 1| {worst:.2e}")


def test_c3_blue_oracle(criterion):
    rng = np.random.default_rng(77)
    worst = 0.0
    for i in range(50):
        m = int(rng.integers(2, 11))
        kind = KIND_ORDER[i % 3]
        nug, psill, phi = float(rng.uniform(0, 0.5)), float(rng.uniform(0.5, 3)), float(rng.uniform(2, 8))
        coords = rng.uniform(size=(m, 2))
        values = rng.normal(size=m)
        target = rng.uniform(-0.5, 1.5, size=2)
        mean, var, w, mu = KrigingSystem(coords, VariogramModel(kind, nug, psill, phi)).predict(target[None, :], values)
        o_mean, o_var, o_w, o_mu = ok_oracle(coords.tolist(), values.tolist(), target.tolist(), kind.value, nug, psill, phi)
        gaps = [abs(mean[0] - o_mean), abs(var[0] - o_var), abs(mu[0] - o_mu), float(np.abs(w[0] - o_w).max())]
        worst = max(worst, max(gaps))
    criterion(3, worst <= 1e-8, f"max componentwise gap {worst:.2e} over 50 systems")


def test_c4_redundancy(criterion):
    model = VariogramModel(Kind.EXPONENTIAL, 0.0, 1.0, 1.0)
    ok = True
    parts = []
    for m in (2, 3, 5):
        coords, target = cluster_layout(m)
        w, _, _ = KrigingSystem(np.array(coords), model).solve([target])
        w = w[0]
        cluster, lone = w[:m].sum(), w[m]
        w_idw = idw_weights(np.array(coords), Location(*target), 2.0)
        ok_ratio, idw_ratio = cluster / lone, w_idw[:m].sum() / w_idw[m]
        ok &= cluster < m * lone and ok_ratio < idw_ratio
        parts.append(f"m={m}: OK {ok_ratio:.2f} vs IDW {idw_ratio:.2f}")
    criterion(4, ok, "; ".join(parts))


def test_c5_variogram_round_trip(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    lags = np.linspace(0.05, 1.0, 20)
    worst = 0.0
    hits = {}
    for kind in KIND_ORDER:
        hits[kind] = 0
        for _ in range(20):
            truth = VariogramModel(kind, float(rng.uniform(0.05, 0.5)), float(rng.uniform(0.5, 3.0)), float(rng.uniform(1.5, 6.0)))
            emp = empirical(lags, truth(lags))
            got = fit_model(emp, kind).model
            rel = max(
                abs(got.nugget / truth.nugget - 1),
                abs(got.partial_sill / truth.partial_sill - 1),
                abs(got.range_rate / truth.range_rate - 1),
            )
            worst = max(worst, rel)
            hits[kind] += select_best_model(emp).model.kind is kind
    dt = time.perf_counter() - t0
    ok = worst <= 0.01 and all(h >= 19 for h in hits.values()) and dt < 30
    sel = ", ".join(f"{k.value} {h}/20" for k, h in hits.items())
    criterion(5, ok, f"max relative error {worst:.1e}; selection {sel}; {dt:.1f} s")


def test_c6_field_consistency(criterion):
    # one realization is too noisy per bin; pool all timestamps of the scenario
    truth = VariogramModel(Kind.EXPONENTIAL, 0.1, 1.0, 2.0)
    flat = VariogramModel(Kind.EXPONENTIAL, 0.0, 1e-12, 1.0)
    cfg = SynthConfig(
        station_count=500,
        noise_sd=0.0,
        truth_step=0.5,
        variograms={"pm25": truth, "slp": flat, "t": flat, "rh": flat},
        pm25_coupling={},
        temporal_sd={},
    )
    emp = pooled_semivariogram(build_snapshots(make_scenario(cfg).records), "pm25")
    mx = emp.lag.max()
    sel = (emp.lag >= 0.2 * mx) & (emp.lag <= 0.6 * mx)
    rel = np.abs(emp.gamma[sel] / truth(emp.lag[sel]) - 1)
    criterion(6, sel.sum() > 0 and rel.max() <= 0.15, f"{int(sel.sum())} mid-lag bins, max deviation {rel.max():.1%}")


def test_c7_metric_fixtures(criterion):
    bad = []
    for name, args, expected in metrics.FIXTURES:
        got = getattr(metrics, name)(*args)
        tol = 1e-12 if name == "rmse" and expected == np.sqrt(2.0) else 0.0
        if abs(got - expected) > tol:
            bad.append(f"{name}{args}={got!r}")
    criterion(7, not bad, f"{len(metrics.FIXTURES)} fixtures" + (f", mismatches: {bad}" if bad else ""))


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.slow
def test_c8_directional_sweep(criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    records = make_scenario(SynthConfig()).records
    wins_rmse = wins_sp = 0
    for s in range(10):
        cfg = ExperimentConfig(pseudo_counts=(0, 400), repeats=10, seed=s)
        base, top = summarize(run_experiment(records, cfg), cfg.pseudo_counts)
        assert base["n_runs"] == top["n_runs"] == 10
        wins_rmse += top["rmse_mean"] < base["rmse_mean"]
        wins_sp += top["spatial_pearson_r_mean"] > base["spatial_pearson_r_mean"]

    # the committed table must be what cmd_experiment produces today
    assert main(["experiment", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    fresh, golden = _read(tmp_path / "results.csv"), _read(GOLDEN / "results.csv")
    same = [r["k"] for r in fresh] == [r["k"] for r in golden] and all(
        float(a[c]) == pytest.approx(float(b[c]), rel=1e-9, abs=1e-12) for a, b in zip(fresh, golden) for c in a
    )
    rmse = [float(r["rmse_mean"]) for r in golden]
    trend = all(a > b for a, b in zip(rmse, rmse[1:]))
    dt = time.perf_counter() - t0
    ok = wins_rmse >= 8 and wins_sp >= 8 and same and trend and dt < 300
    criterion(
        8,
        ok,
        f"RMSE lower in {wins_rmse}/10, spatial R higher in {wins_sp}/10 repeat-sets; "
        f"golden {'matches' if same else 'differs'}, RMSE trend {' > '.join(f'{v:.3f}' for v in rmse)}; {dt:.0f} s",
    )


def _snapshot_dir(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_c9_determinism(criterion, tmp_path, capsys):
    def run(*argv):
        code = main([str(a) for a in argv])
        out = capsys.readouterr().out
        assert code == 0, argv
        return out

    results = {}
    for tag, jobs in (("a", 1), ("b", 1), ("c", 3)):
        d = tmp_path / tag
        out = [run("synth", "--out", d, "--station-count", 20, "--timestamps", 5, "--seed", 3, "--jobs", jobs)]
        st = d / "stations.csv"
        out.append(run("variogram", "--input", st, "--out", d / "vario"))
        out.append(run("augment", "--input", st, "--params", d / "vario" / "variogram_params.json", "--k", 40, "--neighbor-radius", 0.3, "--seed", 1, "--output", d / "aug.csv", "--jobs", jobs))
        out.append(run("train", "--train", d / "aug.csv", "--model", d / "model.json", "--n-trees", 15, "--jobs", jobs))
        out.append(run("evaluate", "--model", d / "model.json", "--test", st, "--output", d / "report"))
        out.append(run("evaluate", "--train", d / "aug.csv", "--test", st, "--output", d / "report2", "--n-trees", 15, "--jobs", jobs))
        out.append(run("experiment", "--stations", st, "--out", d / "exp", "--pseudo-counts", "0,30", "--repeats", 3, "--n-trees", 10, "--neighbor-radius", 0.3, "--jobs", jobs))
        results[tag] = (_snapshot_dir(d), [o.replace(str(d), "<dir>") for o in out])
    files_a, out_a = results["a"]
    same = all(results[t][0] == files_a and results[t][1] == out_a for t in ("b", "c"))
    criterion(9, same and len(files_a) >= 10, f"{len(files_a)} output files, 6 commands, identical across reruns and 1 vs 3 threads")
