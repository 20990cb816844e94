"""Command-line interface.

Subcommands::

    krigaug synth       write a synthetic scenario (stations.csv, truth.csv)
    krigaug variogram   pooled empirical semivariogram and model fits
    krigaug augment     labeled rows plus k kriged pseudo-labeled rows
    krigaug train       fit the forest + residual model, save as JSON
    krigaug evaluate    score a saved (or freshly trained) model on a test CSV
    krigaug experiment  sweep pseudo-label counts over seeded station holdouts

Every option can also come from ``--config FILE``, a plain ``key = value``
file whose keys are the long option names with underscores (``n_trees = 50``,
``pseudo_counts = 0, 200, 400``). Command-line flags win over the file.

On failure the last line on stderr is a JSON object
``{"error": <code>, "message": <text>}`` and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .augmentation import FilterConfig, augment_dataset
from .errors import InputError, KrigAugError
from .io import (
    OutputError,
    read_json,
    read_station_csv,
    read_training_csv,
    write_augmented_csv,
    write_csv,
    write_json,
    write_station_csv,
    write_truth_csv,
)
from .pipeline import (
    METRICS,
    ExperimentConfig,
    bounding_box,
    evaluate_model,
    fit_variograms,
    pseudo_pool,
    run_experiment,
    station_locations,
    summarize,
    train_model,
    variogram_models,
)
from .predictor import ForestParams, JointModel
from .spatial import VARIABLES, build_snapshots
from .synth import SynthConfig, make_scenario
from .variogram import KIND_ORDER, VariogramModel

log = logging.getLogger("krigaug")

EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(InputError):
    code = "usage"


def _bool(s) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _depth(s):
    v = str(s).strip().lower()
    return None if v in ("none", "") else int(v)


def _max_features(s):
    v = str(s).strip().lower()
    if v in ("sqrt", "all"):
        return v
    return None if v == "none" else int(v)


def _int_list(s) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in str(s).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {s!r}") from None


# name -> (type, default, help)
OPTIONS = {
    "out": (str, ".", "output directory"),
    "seed": (int, 0, "master seed"),
    "jobs": (int, 1, "worker threads (results do not depend on it)"),
    # synth
    "station_count": (int, 40, "number of stations"),
    "timestamps": (int, 30, "number of timestamps"),
    "noise_sd": (float, 2.0, "PM2.5 measurement noise standard deviation"),
    "truth_step": (float, 0.05, "truth grid spacing"),
    # data paths
    "stations": (str, None, "station CSV"),
    "input": (str, None, "input station CSV"),
    "train": (str, None, "training CSV (station or augmented layout)"),
    "test": (str, None, "test station CSV"),
    "model": (str, None, "model JSON"),
    "params": (str, None, "variogram parameter JSON from the variogram command"),
    "output": (str, None, "output file"),
    # variogram
    "variable": (str, "all", "pm25, slp, t, rh or all"),
    "kind": (str, "auto", "auto, exponential, spherical or gaussian"),
    "variogram_scope": (str, "global", "global (pooled over timestamps) or per-timestamp"),
    # augmentation
    "aoi_radius": (float, 0.01, "candidates closer than this to a station are dropped"),
    "neighbor_radius": (float, 0.2, "radius for counting neighboring stations"),
    "min_neighbors": (int, 4, "stations required within neighbor_radius"),
    "grid_step": (float, 0.02, "candidate grid spacing"),
    "k": (int, 0, "number of pseudo-labeled rows"),
    # model
    "n_trees": (int, 100, "trees in the forest"),
    "max_depth": (_depth, 12, "maximum tree depth or none"),
    "min_leaf": (int, 2, "minimum (bootstrap-weighted) rows per leaf"),
    "max_features": (_max_features, "sqrt", "features tried per split: sqrt, all or an integer"),
    "bootstrap": (_bool, True, "bootstrap rows per tree"),
    "residual": (str, "knn", "residual learner: knn or zero"),
    "residual_k": (int, 5, "neighbors for the knn residual learner"),
    # experiment
    "pseudo_counts": (_int_list, (0, 200, 400), "comma-separated pseudo-label counts"),
    "repeats": (int, 10, "repeats per pseudo-label count"),
    "test_fraction": (float, 0.2, "fraction of stations held out"),
}

COMMON = ("seed", "jobs")
FILTER = ("aoi_radius", "neighbor_radius", "min_neighbors", "grid_step")
FOREST = ("n_trees", "max_depth", "min_leaf", "max_features", "bootstrap", "residual", "residual_k")

COMMANDS = {
    "synth": ("out", "stations", "station_count", "timestamps", "noise_sd", "truth_step") + COMMON,
    "variogram": ("input", "out", "variable", "kind"),
    "augment": ("input", "params", "output", "kind", "variogram_scope", "k") + FILTER + COMMON,
    "train": ("train", "model") + FOREST + COMMON,
    "evaluate": ("test", "model", "train", "output") + FOREST + COMMON,
    "experiment": ("stations", "out", "pseudo_counts", "repeats", "test_fraction", "kind", "variogram_scope")
    + FILTER
    + FOREST
    + COMMON,
}

HELP = {
    "synth": "write a synthetic scenario",
    "variogram": "fit semivariogram models per variable",
    "augment": "build an augmented training CSV",
    "train": "train the two-stage model",
    "evaluate": "evaluate a model on held-out stations",
    "experiment": "sweep pseudo-label counts over seeded repeats",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krigaug", description="Kriging-based pseudo-label augmentation for PM2.5.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="key = value file with defaults for any option below")
        for opt in opts:
            typ, default, text = OPTIONS[opt]
            shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
            p.add_argument(
                "--" + opt.replace("_", "-"),
                dest=opt,
                type=typ,
                default=None,
                help=f"{text} (default: {shown})",
            )
    return parser


def read_config(path) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise InputError(f"malformed config {path}: {exc.message}") from None
    return {k.replace("-", "_"): v.strip() for k, v in cp["run"].items()}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from built-in defaults."""
    allowed = COMMANDS[args.command]
    file_values = read_config(args.config) if args.config else {}
    unknown = sorted(set(file_values) - set(allowed))
    if unknown:
        raise UsageError(f"config keys not used by {args.command}: {', '.join(unknown)}")
    for opt in allowed:
        if getattr(args, opt) is not None:
            continue
        typ, default, _ = OPTIONS[opt]
        if opt in file_values:
            try:
                value = typ(file_values[opt])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {opt}: {exc}") from None
        else:
            value = default
        setattr(args, opt, value)
    return args


def _require(args, *names):
    for n in names:
        if getattr(args, n) in (None, ""):
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _filter(args) -> FilterConfig:
    return FilterConfig(args.aoi_radius, args.neighbor_radius, args.min_neighbors)


def _forest(args) -> ForestParams:
    return ForestParams(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        max_features=args.max_features,
        bootstrap=args.bootstrap,
    )


def cmd_synth(args) -> dict:
    cfg = SynthConfig(
        station_count=args.station_count,
        timestamps=args.timestamps,
        seed=args.seed,
        noise_sd=args.noise_sd,
        truth_step=args.truth_step,
    )
    sc = make_scenario(cfg)
    out = Path(args.out)
    stations_path = Path(args.stations) if args.stations else out / "stations.csv"
    n_st = write_station_csv(stations_path, sc.records)
    n_tr = write_truth_csv(out / "truth.csv", sc.timestamps, sc.grid, sc.truth_grid)
    return {"stations": str(stations_path), "station_rows": n_st, "truth": str(out / "truth.csv"), "truth_rows": n_tr}


BIN_COLUMNS = ("variable", "bin", "lower", "upper", "lag", "gamma", "count")
FIT_COLUMNS = ("variable", "kind", "nugget", "partial_sill", "range_rate", "fit_rmse", "degenerate", "selected")


def cmd_variogram(args) -> dict:
    _require(args, "input")
    if args.variable == "all":
        variables = VARIABLES
    elif args.variable in VARIABLES:
        variables = (args.variable,)
    else:
        raise UsageError(f"unknown variable {args.variable!r}; use one of {', '.join(VARIABLES)} or all")
    snaps = build_snapshots(read_station_csv(args.input))
    fits = fit_variograms(snaps, args.kind, variables)
    out = Path(args.out)

    bins, table, params = [], [], {}
    for var in variables:
        f = fits[var]
        emp = f["empirical"]
        for i in range(emp.n_bins):
            bins.append((var, i, emp.lower[i], emp.upper[i], emp.lag[i], emp.gamma[i], int(emp.count[i])))
        sel = f["selected"]
        for kind in KIND_ORDER:
            if kind in f["fits"]:
                r = f["fits"][kind]
                m = r.model
                table.append((var, kind.value, m.nugget, m.partial_sill, m.range_rate, r.fit_rmse, r.degenerate, r is sel))
        params[var] = {
            "selected": sel.to_dict(),
            "fits": {k.value: r.to_dict() for k, r in f["fits"].items()},
        }
    write_csv(out / "variogram_bins.csv", BIN_COLUMNS, bins)
    write_csv(out / "variogram_fits.csv", FIT_COLUMNS, table)
    write_json(out / "variogram_params.json", {"kind": args.kind, "scope": "global", "variables": params})
    return {"selected": {v: params[v]["selected"]["kind"] for v in variables}, "bins": len(bins)}


def load_models(path) -> dict[str, VariogramModel]:
    doc = read_json(path)
    try:
        entries = doc["variables"]
        missing = [v for v in VARIABLES if v not in entries]
        if missing:
            raise InputError(f"{path}: no variogram parameters for {', '.join(missing)}")
        return {v: VariogramModel.from_dict(entries[v]["selected"]) for v in VARIABLES}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: not a variogram parameter file ({exc})") from None


def cmd_augment(args) -> dict:
    _require(args, "input")
    records = read_station_csv(args.input)
    snaps = build_snapshots(records)
    if args.params:
        models = load_models(args.params)
    else:
        models = variogram_models(snaps, args.kind, args.variogram_scope)
    box = bounding_box(list(station_locations(records).values()))
    pool = pseudo_pool(snaps, models, _filter(args), args.grid_step, box) if args.k else []
    data = augment_dataset(records, pool, args.k, args.seed)
    output = args.output or str(Path("augmented.csv"))
    n = write_augmented_csv(output, data)
    return {"output": output, "rows": n, "labeled": n - data.n_pseudo, "pseudo": data.n_pseudo}


def cmd_train(args) -> dict:
    _require(args, "train")
    rows = read_training_csv(args.train)
    model = train_model(rows, _forest(args), args.residual, args.residual_k, seed=args.seed, n_jobs=args.jobs)
    output = args.model or "model.json"
    write_json(output, model.to_dict())
    return {"model": output, "rows": len(rows), "trees": model.forest.n_trees}


REPORT_COLUMNS = ("rmse", "mae", "pearson_r", "spatial_pearson_r", "n")


def cmd_evaluate(args) -> dict:
    _require(args, "test")
    if bool(args.model) == bool(args.train):
        raise UsageError("give exactly one of --model or --train")
    test = read_station_csv(args.test)
    if args.model:
        try:
            model = JointModel.from_dict(read_json(args.model))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{args.model}: malformed model document ({exc})") from None
    else:
        model = train_model(read_training_csv(args.train), _forest(args), args.residual, args.residual_k, args.seed, args.jobs)
    report = evaluate_model(model, test)
    stem = Path(args.output or "report")
    write_json(stem.with_suffix(".json"), report.to_dict())
    write_csv(stem.with_suffix(".csv"), REPORT_COLUMNS, [[getattr(report, f) for f in REPORT_COLUMNS]])
    return report.to_dict()


SUMMARY_COLUMNS = ("k", "n_runs", "n_failed") + tuple(f"{m}_{s}" for m in METRICS for s in ("mean", "sd"))
RUN_COLUMNS = ("k", "repeat", "status") + METRICS + ("n", "error")


def experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        pseudo_counts=tuple(args.pseudo_counts),
        repeats=args.repeats,
        seed=args.seed,
        test_fraction=args.test_fraction,
        filter=_filter(args),
        grid_step=args.grid_step,
        variogram_kind=args.kind,
        variogram_scope=args.variogram_scope,
        forest=_forest(args),
        residual=args.residual,
        residual_k=args.residual_k,
        n_jobs=args.jobs,
    )


def cmd_experiment(args) -> dict:
    """Without ``--stations`` the default synthetic scenario is used."""
    config = experiment_config(args)
    records = read_station_csv(args.stations) if args.stations else make_scenario(SynthConfig()).records
    results = run_experiment(records, config)
    out = Path(args.out)

    runs = []
    for r in results:
        if r.report is None:
            runs.append((r.k, r.repeat, "failed") + ("",) * (len(METRICS) + 1) + (r.error,))
        else:
            runs.append((r.k, r.repeat, "ok") + tuple(getattr(r.report, m) for m in METRICS) + (r.report.n, ""))
    summary = summarize(results, config.pseudo_counts)
    rows = []
    for row in summary:
        n_failed = sum(1 for r in results if r.k == row["k"] and r.report is None)
        rows.append([row["k"], row["n_runs"], n_failed] + [row[c] for c in SUMMARY_COLUMNS[3:]])
    write_csv(out / "runs.csv", RUN_COLUMNS, runs)
    write_csv(out / "results.csv", SUMMARY_COLUMNS, rows)

    failed = [r for r in results if r.report is None]
    if failed:
        raise ExperimentFailure(f"{len(failed)} of {len(results)} runs failed; first: {failed[0].error}")
    return {"results": str(out / "results.csv"), "runs": len(results)}


class ExperimentFailure(KrigAugError):
    code = "experiment_failed"


HANDLERS = {
    "synth": cmd_synth,
    "variogram": cmd_variogram,
    "augment": cmd_augment,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def _fail(code: str, message: str, status: int) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(args.log_level)
    try:
        resolve(args)
        _emit(HANDLERS[args.command](args))
    except UsageError as exc:
        return _fail(exc.code, str(exc), EXIT_USAGE)
    except KrigAugError as exc:
        return _fail(exc.code, str(exc), EXIT_ERROR)
    except OSError as exc:
        err = OutputError(str(exc))
        return _fail(err.code, str(exc), EXIT_ERROR)
    finally:
        log.removeHandler(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
