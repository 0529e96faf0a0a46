"""Command-line pipeline: simulate, ingest, featurize, train, crossval, tune, detect, report.

Every subcommand writes into an output directory together with
``config.ini`` (the fully resolved settings) and ``manifest.json`` (inputs,
config hash and artifact checksums). Rerunning with ``--config
<dir>/config.ini`` reproduces the outputs byte for byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .classifiers import DISPLAY_NAMES, METRIC_NAMES, ModelFormatError, TrainedModel, cross_validate, resolve_kind, train
from .data import (
    DataError,
    join_laser_log,
    label_by_subset,
    load_frames,
    load_laser_log,
    summarize,
    write_frames,
    write_laser_log,
)
from .detector import DEFAULT_BINS, DEFAULT_MARGINS, DetectorConfig, detect_batch, score_distribution, tune_threshold
from .dynamics import DynamicsConfig, dynamics_config_from_mapping, dynamics_config_to_mapping
from .features import (
    FeaturizerConfig,
    build_features,
    compute_residuals,
    concat_matrices,
    read_feature_matrix,
    read_featurizer_config,
    write_feature_matrix,
)
from .simulate import inject_attack, load_scenario, run_scenario, simulate_attack, synthetic_benchmark

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class NumericalError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_record(out: Path, command: str, settings: dict, inputs: Sequence[str], artifacts: Sequence[str]) -> None:
    """Write config.ini and manifest.json; no wall-clock data so reruns stay byte-identical."""
    parser = configparser.ConfigParser()
    parser["run"] = {"command": command}
    for key, value in sorted(settings.items()):
        if value is None:
            continue
        if isinstance(value, dict):
            parser[key] = {k: str(v) for k, v in value.items()}
        else:
            parser["run"][key] = str(value)
    buf = io.StringIO()
    parser.write(buf)
    text = buf.getvalue()
    (out / "config.ini").write_text(text, encoding="utf-8")
    manifest = {
        "command": command,
        "version": __version__,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if p and Path(p).is_file()},
        "artifacts": {name: _sha256(out / name) for name in sorted(artifacts)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_config(path: Optional[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        if not Path(path).is_file():
            raise UsageError(f"config file {path} not found")
        parser.read(path, encoding="utf-8")
    return parser


def _setting(args, parser, name: str, default=None, cast=str, section: str = "run"):
    """Flag value if given, else the config file's ``[section] name``, else ``default``."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if parser.has_option(section, name):
        raw = parser.get(section, name)
        return cast(raw) if cast is not str else raw
    return default


def _list(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_list(v))
        return out
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _dynamics(args, parser) -> DynamicsConfig:
    values = dict(parser.items("vehicle")) if parser.has_section("vehicle") else {}
    if getattr(args, "vehicle", None):
        vparser = configparser.ConfigParser()
        text = Path(args.vehicle).read_text(encoding="utf-8")
        try:
            vparser.read_string(text)
        except configparser.MissingSectionHeaderError:
            vparser.read_string("[vehicle]\n" + text)
        if vparser.has_section("vehicle"):
            values.update(dict(vparser.items("vehicle")))
    if getattr(args, "convention", None):
        values["convention"] = args.convention
    return dynamics_config_from_mapping(values)


def _featurizer(args, parser) -> FeaturizerConfig:
    sec = parser["featurizer"] if parser.has_section("featurizer") else {}

    def pick(name, cast, default):
        v = getattr(args, name, None)
        if v is not None:
            return v
        if name in sec:
            return cast(sec[name])
        return default

    def as_bool(v):
        return str(v).strip().lower() in ("1", "true", "yes", "on")

    return FeaturizerConfig(
        window=pick("window", int, 10),
        include_raw=pick("include_raw", as_bool, True),
        include_residuals=pick("include_residuals", as_bool, True),
        include_arm=pick("include_arm", as_bool, False),
        convention=pick("convention", str, "as-printed"),
    )


def _hyperparams(args, parser, kind: str) -> dict:
    out = {}
    section = f"hyperparams.{kind}"
    if parser.has_section(section):
        for k, v in parser.items(section):
            out[k] = _coerce(v)
    for item in getattr(args, "param", None) or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _coerce(v.strip())
    return out


def _coerce(v: str):
    low = v.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def _column_map(path: Optional[str]) -> Optional[dict]:
    if not path:
        return None
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser.read_string("[columns]\n" + text)
    return dict(parser.items("columns")) if parser.has_section("columns") else None


def _parse_margins(value) -> Optional[list]:
    if not value:
        return None
    out = []
    for part in _list(value):
        if ":" in part:
            lo, hi = part.split(":")
        else:
            lo, hi = part.split("-")
        out.append((float(lo), float(hi)))
    return out


def _fmt(x: float) -> str:
    if x is None or not math.isfinite(x):
        return "0*"
    return f"{x:.3f}"


# ------------------------------------------------------------------ commands


def cmd_simulate(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    settings = {}
    benchmark = args.benchmark or (parser.has_option("run", "benchmark") and parser.getboolean("run", "benchmark"))
    if benchmark:
        n_frames = _setting(args, parser, "frames", 20000, int)
        seed = _setting(args, parser, "seed", 0, int)
        dyn = _dynamics(args, parser)
        recordings = synthetic_benchmark(n_frames, seed=seed, params=dyn.params)
        for rec in recordings:
            write_frames(rec.frames, out / f"{rec.name}.csv")
            write_laser_log(rec.log, out / f"{rec.name}_laser.csv")
            artifacts += [f"{rec.name}.csv", f"{rec.name}_laser.csv"]
        settings.update(benchmark="true", frames=n_frames, seed=seed, vehicle=dynamics_config_to_mapping(dyn))
        inputs = []
        n_rows = sum(len(r.frames) for r in recordings)
    else:
        scenario_path = args.scenario or (parser.get("run", "scenario") if parser.has_option("run", "scenario") else None)
        if not scenario_path:
            raise UsageError("simulate needs --scenario FILE or --benchmark")
        try:
            dyn, scenario, attack = load_scenario(scenario_path)
        except (ValueError, KeyError, configparser.Error) as exc:
            raise DataError(f"invalid scenario: {exc}") from exc
        if attack is not None and attack.intervals:
            frames, log = simulate_attack(dyn, scenario, attack)
        else:
            frames, log = inject_attack(run_scenario(dyn, scenario), attack or _no_attack(), seed=scenario.seed + 1)
        write_frames(frames, out / "frames.csv")
        write_laser_log(log, out / "laser_log.csv")
        artifacts += ["frames.csv", "laser_log.csv"]
        settings.update(scenario=scenario_path)
        inputs = [scenario_path]
        n_rows = len(frames)
    _write_run_record(out, "simulate", settings, inputs, artifacts)
    print(f"simulate: wrote {n_rows} frames to {out}")
    return EXIT_OK


def _no_attack():
    from .simulate import AttackScript

    return AttackScript()


def cmd_ingest(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _list(args.input) or _list(_setting(args, parser, "input"))
    if not inputs:
        raise UsageError("ingest needs at least one --input file")
    kinds = _list(args.subset_kind) or _list(_setting(args, parser, "subset_kind"))
    logs = _list(args.laser_log) or _list(_setting(args, parser, "laser_log"))
    if kinds and len(kinds) not in (1, len(inputs)):
        raise UsageError("give one --subset-kind, or one per input")
    if logs and len(logs) != len(inputs):
        raise UsageError("give one --laser-log per input")
    tolerance = _setting(args, parser, "tolerance", None, float)
    cmap_path = args.column_map or _setting(args, parser, "column_map")
    cmap = _column_map(cmap_path)
    subsets = {}
    artifacts = []
    for i, path in enumerate(inputs):
        frames = load_frames(path, cmap)
        if kinds:
            frames = label_by_subset(frames, kinds[0] if len(kinds) == 1 else kinds[i])
        if logs:
            frames = join_laser_log(frames, load_laser_log(logs[i]), tolerance)
        name = f"labeled_{i:02d}_{Path(path).stem}.csv"
        write_frames(frames, out / name)
        artifacts.append(name)
        subsets[Path(path).stem] = frames
    summary = summarize(subsets)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subset", "rows"])
        for k, v in summary.row_counts.items():
            w.writerow([k, v])
        w.writerow([])
        w.writerow(["class", "count", "proportion"])
        for k, v in summary.class_counts.items():
            w.writerow([k, v, f"{summary.class_proportions[k]:.4f}"])
    artifacts.append("summary.csv")
    _write_run_record(
        out, "ingest",
        {"input": ",".join(inputs), "subset_kind": ",".join(kinds) or None, "laser_log": ",".join(logs) or None,
         "tolerance": tolerance, "column_map": cmap_path},
        inputs + logs, artifacts,
    )
    print(f"ingest: {summary.total} frames; " + ", ".join(f"{k}={v}" for k, v in summary.class_counts.items()))
    return EXIT_OK


def _featurize_files(paths, dyn: DynamicsConfig, fcfg: FeaturizerConfig, cmap=None):
    matrices = []
    for path in paths:
        frames = load_frames(path, cmap)
        matrices.append(build_features(frames, dyn.params, config=fcfg, source=Path(path).name))
    return concat_matrices(matrices)


def cmd_featurize(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _list(args.input) or _list(_setting(args, parser, "input"))
    if not inputs:
        raise UsageError("featurize needs at least one --input file")
    dyn = _dynamics(args, parser)
    fcfg = _featurizer(args, parser)
    matrix = _featurize_files(inputs, dyn, fcfg, _column_map(args.column_map))
    write_feature_matrix(matrix, out / "features.csv", fcfg)
    _write_run_record(
        out, "featurize",
        {"input": ",".join(inputs), "vehicle": dynamics_config_to_mapping(dyn),
         "featurizer": {k: getattr(fcfg, k) for k in ("window", "include_raw", "include_residuals", "include_arm", "convention")}},
        inputs, ["features.csv", "features.csv.ini"],
    )
    print(f"featurize: {matrix.n_samples} samples x {matrix.n_features} features")
    return EXIT_OK


def _read_features(path: str):
    if not Path(path).is_file():
        raise DataError(f"feature file {path} not found")
    return read_feature_matrix(path)


def cmd_train(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    features = args.features or _setting(args, parser, "features")
    if not features:
        raise UsageError("train needs --features FILE")
    kind = resolve_kind(args.kind or _setting(args, parser, "kind", "rf"))
    seed = _setting(args, parser, "seed", 0, int)
    hp = _hyperparams(args, parser, kind)
    matrix = _read_features(features)
    fcfg = read_featurizer_config(features)
    meta = {}
    if fcfg is not None:
        meta["featurizer"] = {k: getattr(fcfg, k) for k in ("window", "include_raw", "include_residuals", "include_arm", "convention")}
    model = train(kind, matrix, hp, seed, metadata=meta)
    model.save(out / "model.json")
    _write_run_record(
        out, "train",
        {"features": features, "kind": kind, "seed": seed, f"hyperparams.{kind}": {k: v for k, v in model.hyperparams.items()}},
        [features], ["model.json"],
    )
    print(f"train: {kind} on {matrix.n_samples} samples -> {out / 'model.json'}")
    return EXIT_OK


def crossval_table(results: dict) -> list[list[str]]:
    """Rows = metrics, columns = classifier kinds."""
    kinds = list(results)
    rows = [["Metrics"] + [DISPLAY_NAMES.get(k, k.upper()) for k in kinds]]
    labels = {"precision": "Precision", "recall": "Recall", "f1": "F1 Score", "accuracy": "Accuracy"}
    for name in ("precision", "recall", "f1", "accuracy"):
        rows.append([labels[name]] + [_fmt(results[k].mean[name]) for k in kinds])
    return rows


def _render(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def cmd_crossval(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    features = args.features or _setting(args, parser, "features")
    if not features:
        raise UsageError("crossval needs --features FILE")
    k = _setting(args, parser, "k", 5, int)
    if k < 2:
        raise UsageError("k must be at least 2")
    seed = _setting(args, parser, "seed", 0, int)
    kinds = [resolve_kind(x) for x in (_list(args.kinds) or _list(_setting(args, parser, "kinds")) or ["lr", "rf", "knn", "gnb"])]
    fmt = args.format or _setting(args, parser, "format", "tabular")
    matrix = _read_features(features)
    if matrix.labels is None or len(np.unique(matrix.labels)) < 2:
        raise DataError("cross-validation needs a labeled dataset containing both classes")
    results = {}
    settings = {"features": features, "k": k, "seed": seed, "kinds": ",".join(kinds), "format": fmt}
    for kind in kinds:
        hp = _hyperparams(args, parser, kind)
        results[kind] = cross_validate(kind, matrix, k, hp, seed)
        settings[f"hyperparams.{kind}"] = hp or None
    for kind, res in results.items():
        for fold in res.folds:
            if not all(math.isfinite(getattr(fold, m)) for m in METRIC_NAMES):
                raise NumericalError(f"{kind}: non-finite metric")
    with open(out / "folds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "fold", "test_size", "precision", "recall", "f1", "accuracy", "tp", "fp", "fn", "tn"])
        for kind, res in results.items():
            for i, (fold, size) in enumerate(zip(res.folds, res.test_sizes)):
                w.writerow([kind, i, size] + [repr(float(getattr(fold, m))) for m in METRIC_NAMES] + [fold.tp, fold.fp, fold.fn, fold.tn])
    table = crossval_table(results)
    if fmt == "structured-text":
        body = json.dumps(
            {kind: {"mean": res.mean, "folds": [f.as_dict() for f in res.folds], "test_sizes": list(res.test_sizes)} for kind, res in results.items()},
            indent=2, sort_keys=True,
        ) + "\n"
        name = "report.json"
    else:
        footnote = "* metric undefined for this run, reported as 0\n" if any("0*" in c for r in table for c in r) else ""
        body = _render(table) + footnote
        name = "report.txt"
    (out / name).write_text(body, encoding="utf-8")
    _write_run_record(out, "crossval", settings, [features], ["folds.csv", name])
    sys.stdout.write(body)
    return EXIT_OK


def cmd_tune(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = args.model or _setting(args, parser, "model")
    features = args.features or _setting(args, parser, "features")
    if not model_path or not features:
        raise UsageError("tune needs --model and --features")
    margins = _parse_margins(args.margins or _setting(args, parser, "margins")) or list(DEFAULT_MARGINS)
    bins = _setting(args, parser, "bins", DEFAULT_BINS, int)
    ranking = _setting(args, parser, "ranking", "fn-first")
    model = _load_model(model_path)
    matrix = _read_features(features)
    if matrix.labels is None:
        raise DataError("tune needs labeled evaluation data")
    scores = np.atleast_1d(model.predict_proba(matrix))
    normal, attack = scores[matrix.labels == 0], scores[matrix.labels == 1]
    if normal.size == 0 or attack.size == 0:
        raise DataError("tune needs both normal and attack samples")
    result = tune_threshold(normal, attack, margins, ranking)
    with open(out / "margins.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["margin_lo", "margin_hi", "normal_misclassified", "attack_misclassified", "fp_rate", "fn_rate", "winner"])
        for rep in result.reports:
            w.writerow([rep.lo, rep.hi, rep.normal_misclassified, rep.attack_misclassified,
                        f"{rep.fp_rate:.6g}", f"{rep.fn_rate:.6g}", int(rep is result.winner)])
    normal_h, attack_h = score_distribution(model, matrix, bins)
    with open(out / "histograms.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "normal", "abnormal"])
        for (lo, hi, cn), (_, _, ca) in zip(normal_h.rows(), attack_h.rows()):
            w.writerow([repr(lo), repr(hi), cn, ca])
    (out / "threshold.txt").write_text(f"{result.threshold!r}\n", encoding="utf-8")
    _write_run_record(
        out, "tune",
        {"model": model_path, "features": features, "margins": ",".join(f"{a}:{b}" for a, b in margins), "bins": bins, "ranking": ranking},
        [model_path, features], ["margins.csv", "histograms.csv", "threshold.txt"],
    )
    rows = [["Detection margin", "Normal misclassified", "Attack misclassified", "FP rate", "FN rate"]]
    for rep in result.reports:
        rows.append([rep.label(), str(rep.normal_misclassified), str(rep.attack_misclassified), f"{rep.fp_rate:.4g}", f"{rep.fn_rate:.4g}"])
    sys.stdout.write(_render(rows))
    print(f"winner: {result.winner.label()}  threshold: {result.threshold:g}")
    return EXIT_OK


def _load_model(path: str) -> TrainedModel:
    if not Path(path).is_file():
        raise DataError(f"model file {path} not found")
    try:
        return TrainedModel.load(path)
    except (ModelFormatError, KeyError, TypeError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc


def cmd_detect(args, parser) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = args.model or _setting(args, parser, "model")
    inputs = _list(args.input) or _list(_setting(args, parser, "input"))
    if not model_path or not inputs:
        raise UsageError("detect needs --model and --input")
    threshold = _setting(args, parser, "threshold", None, float)
    tuned = args.tuned or _setting(args, parser, "tuned")
    if threshold is None and tuned:
        threshold = float(Path(tuned, "threshold.txt").read_text().strip() if Path(tuned).is_dir() else Path(tuned).read_text().strip())
    if threshold is None:
        threshold = 0.5
    model = _load_model(model_path)
    fmeta = model.metadata.get("featurizer")
    fcfg = FeaturizerConfig(**fmeta) if fmeta else _featurizer(args, parser)
    dyn = _dynamics(args, parser)
    matrix = _featurize_files(inputs, dyn, fcfg, _column_map(args.column_map))
    if matrix.n_features != model.n_features:
        raise DataError(f"model expects {model.n_features} features, telemetry gives {matrix.n_features}")
    config = DetectorConfig(threshold, model)
    scores, alarms = detect_batch(config, matrix.X)
    with open(out / "verdicts.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "score", "decision"])
        for t, s, a in zip(matrix.timestamps, scores, alarms):
            w.writerow([repr(float(t)), repr(float(s)), "Abnormal" if a else "Normal"])
    n_alarm = int(alarms.sum())
    summary = f"detect: {len(scores)} verdicts, {n_alarm} Abnormal, {len(scores) - n_alarm} Normal (threshold {threshold:g})"
    if matrix.labels is not None:
        truth = matrix.labels.astype(bool)
        union = int(np.sum(truth | alarms))
        overlap = int(np.sum(truth & alarms)) / union if union else 1.0
        summary += f"; alarm/attack overlap {overlap:.4f}"
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    _write_run_record(
        out, "detect", {"model": model_path, "input": ",".join(inputs), "threshold": repr(threshold)},
        [model_path] + inputs, ["verdicts.csv", "summary.txt"],
    )
    print(summary)
    return EXIT_OK


def cmd_report(args, parser) -> int:
    """Estimated versus measured lateral states over a telemetry file."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _list(args.input) or _list(_setting(args, parser, "input"))
    if len(inputs) != 1:
        raise UsageError("report takes exactly one --input telemetry file")
    dyn = _dynamics(args, parser)
    frames = load_frames(inputs[0], _column_map(args.column_map))
    res = compute_residuals(frames, dyn)
    vy = np.array([f.lateral_speed for f in frames[1:]])
    r = np.array([f.yaw_rate for f in frames[1:]])
    if not (np.all(np.isfinite(res.e_vy)) and np.all(np.isfinite(res.e_r))):
        raise NumericalError("non-finite residuals")
    with open(out / "estimation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual_vy", "estimated_vy", "actual_r", "estimated_r", "residual_vy", "residual_r"])
        for row in zip(res.timestamps, vy, res.predicted_vy, r, res.predicted_r, res.e_vy, res.e_r):
            w.writerow([repr(float(v)) for v in row])

    def rmse(e):
        return float(np.sqrt(np.mean(e**2))) if len(e) else 0.0

    ss = dyn.state_space()
    lines = [
        f"lateral model ({ss.convention}): A={ss.a:.4f} B={ss.b:.4f} C={ss.c:.4f} D={ss.d:.4f} E={ss.e:.4f} F={ss.f:.4f}",
        f"samples: {len(res)}",
        f"residual v_y: rmse={rmse(res.e_vy):.6g} mean={float(np.mean(res.e_vy)) if len(res) else 0.0:.6g}",
        f"residual r:   rmse={rmse(res.e_r):.6g} mean={float(np.mean(res.e_r)) if len(res) else 0.0:.6g}",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_run_record(out, "report", {"input": inputs[0], "vehicle": dynamics_config_to_mapping(dyn)}, inputs, ["estimation.csv", "report.txt"])
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "crossval": cmd_crossval,
    "tune": cmd_tune,
    "detect": cmd_detect,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="avaba", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, inputs=True):
        sp.add_argument("--config", help="INI file supplying any option; flags override it")
        sp.add_argument("--out", required=True, help="output run directory")
        sp.add_argument("--vehicle", help="vehicle parameter file (mass, lf, lr, iz, c1, c2, vx, dt, convention, steering_limit)")
        sp.add_argument("--convention", choices=["as-printed", "sum-form"])
        if inputs:
            sp.add_argument("--input", action="append", help="telemetry file (repeatable or comma separated)")
            sp.add_argument("--column-map", dest="column_map", help="INI file mapping schema fields to header names")

    sp = sub.add_parser("simulate", help="generate synthetic labeled telemetry")
    common(sp, inputs=False)
    sp.add_argument("--scenario", help="scenario INI file")
    sp.add_argument("--benchmark", action="store_true", help="generate the seeded multi-recording benchmark")
    sp.add_argument("--frames", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("ingest", help="load, label and summarise telemetry files")
    common(sp)
    sp.add_argument("--subset-kind", dest="subset_kind", action="append", help="normal or attack, per input")
    sp.add_argument("--laser-log", dest="laser_log", action="append", help="laser log per input")
    sp.add_argument("--tolerance", type=float, help="laser-log join tolerance in seconds")

    sp = sub.add_parser("featurize", help="build feature matrices")
    common(sp)
    sp.add_argument("--window", type=int)
    sp.add_argument("--include-arm", dest="include_arm", action="store_const", const=True)
    sp.add_argument("--no-raw", dest="include_raw", action="store_const", const=False)
    sp.add_argument("--no-residuals", dest="include_residuals", action="store_const", const=False)

    sp = sub.add_parser("train", help="train one classifier")
    common(sp, inputs=False)
    sp.add_argument("--features")
    sp.add_argument("--kind")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--param", action="append", help="hyperparameter key=value")

    sp = sub.add_parser("crossval", help="stratified k-fold comparison of classifiers")
    common(sp, inputs=False)
    sp.add_argument("--features")
    sp.add_argument("--kinds", action="append")
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--param", action="append", help="hyperparameter key=value (applies to every kind)")
    sp.add_argument("--format", choices=["tabular", "structured-text"])

    sp = sub.add_parser("tune", help="detection-margin analysis and score histograms")
    common(sp, inputs=False)
    sp.add_argument("--model")
    sp.add_argument("--features")
    sp.add_argument("--margins", action="append", help="lo:hi (repeatable or comma separated)")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--ranking", choices=["fn-first", "fp-first", "total"])

    sp = sub.add_parser("detect", help="score telemetry and emit verdicts")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--tuned", help="tune output directory (or threshold.txt) to take the threshold from")
    sp.add_argument("--window", type=int)

    sp = sub.add_parser("report", help="estimated vs measured lateral dynamics")
    common(sp)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = _load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError, ValueError, KeyError, configparser.Error) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
