"""Command-line entry point: ``sleepstates <subcommand> ...``.

Stages exchange plain CSV files so every step can be run, cached and tested
on its own. Every config field is also a flag (``--field-name``); a
``--config`` file of ``key=value`` lines supplies defaults that flags
override.

Exit codes: 0 ok, 2 usage, 3 missing file, 4 parse failure, 5 config
violation, 6 unusable data. Failures print one line to stderr:
``sleepstates: error[<category>]: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import csvio
from ._parallel import pmap
from .classifiers import TrainConfig, label_steps, load_model, save_model
from .classifiers.forest import ForestModel, feature_importance, predict_proba_forest, train_forest
from .classifiers.logistic import predict_proba_logistic, train_logistic
from .edap import DEFAULT_TOLERANCES, check_tolerances, edap
from .extract import ExtractConfig, extract
from .features import DEFAULT_WINDOWS_MIN, build_features, make_specs
from .model import EventClass, SleepWindow
from .rules import DetectorConfig, detect
from .svg import series_svg
from .synth import SynthConfig, generate_corpus

log = logging.getLogger("sleepstates")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_PARSE = 4
EXIT_CONFIG = 5
EXIT_DATA = 6

CONFIG_CLASSES = (SynthConfig, DetectorConfig, TrainConfig, ExtractConfig)
_SYNTH_SKIP = {"series_id", "rng_seed", "nonwear_segments"}


class CliError(Exception):
    def __init__(self, category: str, code: int, message: str):
        super().__init__(message)
        self.category = category
        self.code = code


# -- config plumbing -------------------------------------------------------


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _field_type(default) -> Callable[[str], object]:
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if default is None:
        return int
    return str


def _add_config_flags(parser: argparse.ArgumentParser, cls, skip: set[str] = frozenset()) -> None:
    group = parser.add_argument_group(f"{cls.__name__} options")
    for f in fields(cls):
        if f.name in skip:
            continue
        group.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f"cfg_{f.name}",
            type=_field_type(f.default),
            default=None,
            metavar=f.name.upper(),
            help=f"default: {f.default}",
        )


def read_config_file(path: str) -> dict[str, str]:
    known = {f.name for cls in CONFIG_CLASSES for f in fields(cls)}
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError("missing_file", EXIT_MISSING, f"config file not found: {path}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("config", EXIT_CONFIG, f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise CliError("config", EXIT_CONFIG, f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def _build_config(cls, args: argparse.Namespace, skip: set[str] = frozenset(), **extra):
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    values = {}
    try:
        for f in fields(cls):
            if f.name in skip:
                continue
            if f.name in file_values:
                values[f.name] = _field_type(f.default)(file_values[f.name])
            flag = getattr(args, f"cfg_{f.name}", None)
            if flag is not None:
                values[f.name] = flag
        values.update(extra)
        return cls(**values)
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        raise CliError("config", EXIT_CONFIG, f"{cls.__name__}: {exc}") from None


def _csv_list(text: str, conv=str) -> list:
    try:
        return [conv(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CliError("config", EXIT_CONFIG, f"bad list {text!r}: {exc}") from None


# -- file helpers ----------------------------------------------------------


def _read(fn, path, *a, **kw):
    try:
        return fn(path, *a, **kw)
    except FileNotFoundError:
        raise CliError("missing_file", EXIT_MISSING, f"file not found: {path}") from None
    except (ValueError, csv.Error, UnicodeDecodeError, KeyError) as exc:
        raise CliError("parse", EXIT_PARSE, f"{path}: {exc}") from None


def _read_series(path):
    series, report = _read(csvio.read_series_csv, path)
    if report.rows_skipped:
        log.warning("%s: skipped %d rows %s", path, report.rows_skipped, dict(report.skip_reasons))
    if report.clamped_enmo:
        log.warning("%s: clamped %d negative enmo values", path, report.clamped_enmo)
    if not series:
        raise CliError("data", EXIT_DATA, f"{path}: no series rows")
    return series


def _read_events(path):
    events, report = _read(csvio.read_events_csv, path)
    if report.rows_skipped:
        log.info("%s: skipped %d rows %s", path, report.rows_skipped, dict(report.skip_reasons))
    return events


def _prepare_out(path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


# -- subcommands -----------------------------------------------------------


def cmd_synth(args) -> None:
    segs = []
    for spec in args.nonwear or ():
        try:
            start, dur = spec.split(":")
            segs.append((float(start), float(dur)))
        except ValueError:
            raise CliError("config", EXIT_CONFIG, f"--nonwear expects START_HOUR:DURATION_MIN, got {spec!r}") from None
    cfg = _build_config(SynthConfig, args, _SYNTH_SKIP, nonwear_segments=tuple(segs))
    if args.n_series < 1:
        raise CliError("config", EXIT_CONFIG, "--n-series must be >= 1")
    try:
        corpus = generate_corpus(cfg, args.n_series, seed=args.seed, threads=args.threads)
    except ValueError as exc:
        raise CliError("config", EXIT_CONFIG, str(exc)) from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csvio.write_series_csv([s for s, _, _ in corpus], out / "series.csv")
    csvio.write_events_csv([e for _, ev, _ in corpus for e in ev], out / "events.csv")
    csvio.write_intervals_csv([i for _, _, iv in corpus for i in iv], out / "intervals.csv")
    print(f"wrote {len(corpus)} series to {out}")


def cmd_features(args) -> None:
    series = _read_series(args.series)
    stats = _csv_list(args.stats)
    if args.total_variation and "tv" not in stats:
        stats.append("tv")
    windows = _csv_list(args.windows_min, float)
    try:
        specs_for = lambda s: make_specs(windows, stats, _csv_list(args.channels), s.cadence_seconds)
        mats = pmap(lambda s: build_features(s, specs_for(s), include_hour=not args.no_hour), series, args.threads)
    except ValueError as exc:
        raise CliError("config", EXIT_CONFIG, str(exc)) from None
    names = mats[0].column_names
    if any(m.column_names != names for m in mats):
        raise CliError("data", EXIT_DATA, "series have different cadences, feature names would not line up")
    csvio.write_table(_prepare_out(args.output), list(names), [(m.series_id, m.steps, m.values) for m in mats])


def cmd_detect(args) -> None:
    cfg = _build_config(DetectorConfig, args)
    series = _read_series(args.series)
    results = pmap(lambda s: detect(s, cfg), series, args.threads)
    events = [e for _, ev in results for e in ev]
    csvio.write_predictions(events, _prepare_out(args.output))
    if args.windows_out:
        csvio.write_windows_csv([w for ws, _ in results for w in ws], _prepare_out(args.windows_out))


def cmd_train(args) -> None:
    cfg = _build_config(TrainConfig, args)
    names, blocks = _read(csvio.read_table, args.features)
    events = _read_events(args.events)
    if args.subsample < 1:
        raise CliError("config", EXIT_CONFIG, "--subsample must be >= 1")
    Xs, ys = [], []
    for sid, steps, values in blocks:
        y, dropped = label_steps(steps, sid, events)
        if dropped:
            log.warning("%s: dropped %d unpaired or reversed nights", sid, dropped)
        Xs.append(values[:: args.subsample])
        ys.append(y[:: args.subsample])
    X, y = np.vstack(Xs), np.concatenate(ys)
    try:
        if args.model == "logistic":
            model = train_logistic(X, y, names, cfg)
        else:
            model = train_forest(X, y, names, cfg, threads=args.threads)
    except ValueError as exc:
        raise CliError("data", EXIT_DATA, str(exc)) from None
    save_model(model, _prepare_out(args.output))
    if isinstance(model, ForestModel) and args.importance_out:
        with open(_prepare_out(args.importance_out), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "importance"])
            for name, value in sorted(feature_importance(model).items(), key=lambda kv: -kv[1]):
                w.writerow([name, repr(value)])


def cmd_predict(args) -> None:
    model = _read(load_model, args.model_file)
    names, blocks = _read(csvio.read_table, args.features)
    predict = predict_proba_forest if isinstance(model, ForestModel) else predict_proba_logistic
    try:
        probas = pmap(lambda b: predict(model, b[2], names), blocks, args.threads)
    except ValueError as exc:
        raise CliError("data", EXIT_DATA, str(exc)) from None
    csvio.write_table(_prepare_out(args.output), ["proba"], [(b[0], b[1], p) for b, p in zip(blocks, probas)])


def cmd_extract(args) -> None:
    cfg = _build_config(ExtractConfig, args)
    names, blocks = _read(csvio.read_table, args.proba)
    if names != ["proba"]:
        raise CliError("parse", EXIT_PARSE, f"{args.proba}: expected a single proba column, got {names}")
    by_id = {s.series_id: s for s in _read_series(args.series)}

    def run(block):
        sid, steps, values = block
        s = by_id.get(sid)
        if s is None or not np.array_equal(s.step, steps):
            raise CliError("data", EXIT_DATA, f"probabilities for {sid} do not line up with the series steps")
        try:
            return extract(values[:, 0], s, cfg)
        except ValueError as exc:
            raise CliError("data", EXIT_DATA, f"{sid}: {exc}") from None

    results = pmap(run, blocks, args.threads)
    csvio.write_predictions([e for _, ev in results for e in ev], _prepare_out(args.output))
    if args.windows_out:
        csvio.write_windows_csv([w for ws, _ in results for w in ws], _prepare_out(args.windows_out))


def cmd_score(args) -> None:
    preds = _read(csvio.read_predictions, args.predictions)
    gts = _read_events(args.events)
    intervals = _read(csvio.read_intervals_csv, args.intervals) if args.intervals else None
    try:
        tols = check_tolerances(_csv_list(args.tolerances, int))
    except ValueError as exc:
        raise CliError("config", EXIT_CONFIG, str(exc)) from None
    try:
        report = edap(preds, gts, tols, intervals, threads=args.threads)
    except ValueError as exc:
        raise CliError("data", EXIT_DATA, str(exc)) from None
    if args.output:
        Path(_prepare_out(args.output)).write_text(report.to_csv(), encoding="utf-8")
    sys.stdout.write(report.to_text())
    sys.stdout.write(f"mean_ap={report.mean_ap!r}\n")


def _windows_from_events(events) -> list[SleepWindow]:
    nights: dict[tuple[str, int], dict] = {}
    for ev in events:
        nights.setdefault((ev.series_id, ev.night), {})[ev.event] = ev.step
    out = []
    for (sid, night), pair in sorted(nights.items()):
        on, off = pair.get(EventClass.ONSET), pair.get(EventClass.WAKEUP)
        if on is not None and off is not None and on < off:
            out.append(SleepWindow(sid, on, off, night))
    return out


def cmd_plot(args) -> None:
    series = _read_series(args.series)
    if args.series_id:
        chosen = [s for s in series if s.series_id == args.series_id]
        if not chosen:
            raise CliError("data", EXIT_DATA, f"series {args.series_id!r} not found in {args.series}")
        s = chosen[0]
    else:
        s = series[0]
    windows: list[SleepWindow] = []
    if args.events:
        windows += _windows_from_events(_read_events(args.events))
    if args.windows:
        windows += _read(csvio.read_windows_csv, args.windows)
    Path(_prepare_out(args.output)).write_text(series_svg(s, windows, max_points=args.max_points), encoding="utf-8")


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sleepstates", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--threads", type=int, default=1, help="worker threads (output is identical for any value)")
        p.add_argument("--config", help="key=value file of config defaults; flags override it")
        return p

    p = add("synth", cmd_synth, "generate a synthetic corpus: series.csv, events.csv, intervals.csv")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-series", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="corpus seed; per-series seeds derive from it")
    p.add_argument("--nonwear", action="append", metavar="START_HOUR:DURATION_MIN", help="repeatable")
    _add_config_flags(p, SynthConfig, _SYNTH_SKIP)

    p = add("features", cmd_features, "rolling-statistic feature matrix for every series")
    p.add_argument("series")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--windows-min", default=",".join(map(str, DEFAULT_WINDOWS_MIN)))
    p.add_argument("--stats", default="mean,max,std", help="any of mean,max,std,tv")
    p.add_argument("--channels", default="anglez,enmo")
    p.add_argument("--total-variation", action="store_true", help="add tv columns for every window")
    p.add_argument("--no-hour", action="store_true", help="omit the hour-of-day column")

    p = add("detect", cmd_detect, "rule-based sleep window detection")
    p.add_argument("series")
    p.add_argument("-o", "--output", required=True, help="predictions CSV")
    p.add_argument("--windows-out")
    _add_config_flags(p, DetectorConfig)

    p = add("train", cmd_train, "fit a per-step sleep classifier on a feature CSV")
    p.add_argument("features")
    p.add_argument("events")
    p.add_argument("--model", choices=("logistic", "forest"), default="forest")
    p.add_argument("-o", "--output", required=True, help="model file (JSON)")
    p.add_argument("--importance-out", help="forest only: feature importance CSV")
    p.add_argument("--subsample", type=int, default=1, help="train on every k-th row")
    _add_config_flags(p, TrainConfig)

    p = add("predict", cmd_predict, "per-step sleep probabilities from a trained model")
    p.add_argument("model_file")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True)

    p = add("extract", cmd_extract, "turn probabilities into scored onset/wakeup events")
    p.add_argument("proba")
    p.add_argument("series")
    p.add_argument("-o", "--output", required=True, help="predictions CSV")
    p.add_argument("--windows-out")
    _add_config_flags(p, ExtractConfig)

    p = add("score", cmd_score, "event detection average precision of a predictions CSV")
    p.add_argument("predictions")
    p.add_argument("events")
    p.add_argument("--tolerances", default=",".join(map(str, DEFAULT_TOLERANCES)), help="steps, increasing")
    p.add_argument("--intervals", help="scoring intervals CSV; predictions outside are dropped")
    p.add_argument("-o", "--output", help="report CSV")

    p = add("plot", cmd_plot, "SVG of anglez and enmo with sleep windows shaded")
    p.add_argument("series")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--series-id")
    p.add_argument("--events", help="events CSV whose onset/wakeup pairs are shaded")
    p.add_argument("--windows", help="windows CSV to shade")
    p.add_argument("--max-points", type=int, default=4000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise CliError("config", EXIT_CONFIG, "--threads must be >= 1")
        args.func(args)
    except CliError as exc:
        print(f"sleepstates: error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
