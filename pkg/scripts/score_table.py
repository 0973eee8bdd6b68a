#!/usr/bin/env python3
"""Compare the rule detector and the two trained classifiers on synthetic data.

Trains on the first --n-train series of a seed-fixed corpus, scores on the
remaining --n-test, and prints one EDAP row per (method, feature set).
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from sleepstates.classifiers import TrainConfig, make_labels
from sleepstates.classifiers.forest import predict_proba_forest, train_forest
from sleepstates.classifiers.logistic import predict_proba_logistic, train_logistic
from sleepstates.edap import edap
from sleepstates.extract import extract
from sleepstates.features import Stat, build_features, default_specs, make_specs, stack
from sleepstates.model import EventClass
from sleepstates.rules import detect
from sleepstates.synth import SynthConfig, generate_corpus

FEATURE_SETS = {
    "default": lambda: default_specs(),
    "2hr": lambda: [s for s in default_specs() if s.minutes() == 120],
    "default+tv": lambda: default_specs() + make_specs(stats=[Stat.TOTAL_VARIATION]),
}


def score(preds, corpus):
    truth = [e for _, ev, _ in corpus for e in ev]
    intervals = [iv for _, _, ivs in corpus for iv in ivs]
    return edap(preds, truth, intervals=intervals)


def run_trained(kind, specs, train, test, args):
    mats = [build_features(s, specs, threads=args.threads) for s, _, _ in train]
    X, names = stack(mats)
    y = np.concatenate([make_labels(s, ev) for s, ev, _ in train])
    X, y = X[:: args.subsample], y[:: args.subsample]
    cfg = TrainConfig(n_estimators=args.n_estimators, rng_seed=args.seed)
    if kind == "forest":
        model = train_forest(X, y, names, cfg, threads=args.threads)
        predict = predict_proba_forest
    else:
        model = train_logistic(X, y, names, cfg)
        predict = predict_proba_logistic
    preds = []
    for series, _, _ in test:
        fm = build_features(series, specs, threads=args.threads)
        preds += extract(predict(model, fm.values, fm.column_names), series)[1]
    return score(preds, test)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n-train", type=int, default=7)
    ap.add_argument("--n-test", type=int, default=3)
    ap.add_argument("--n-days", type=int, default=4)
    ap.add_argument("--seed", type=int, default=77)
    ap.add_argument("--sigma-sleep", type=float, default=1.0, help="per-step sleep noise in degrees")
    ap.add_argument("--n-estimators", type=int, default=50)
    ap.add_argument("--subsample", type=int, default=12, help="train on every k-th row")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("-o", "--output", help="also write the table as CSV")
    args = ap.parse_args(argv)

    corpus = generate_corpus(
        SynthConfig(n_days=args.n_days, sigma_sleep_deg=args.sigma_sleep),
        args.n_train + args.n_test,
        seed=args.seed,
        threads=args.threads,
    )
    train, test = corpus[: args.n_train], corpus[args.n_train :]

    rows = []

    def record(method, features, report, seconds):
        means = report.class_means()
        rows.append(
            (method, features, report.mean_ap, means[EventClass.ONSET], means[EventClass.WAKEUP], seconds)
        )
        print(f"{method:<9} {features:<11} {report.mean_ap:8.4f} {means[EventClass.ONSET]:8.4f} "
              f"{means[EventClass.WAKEUP]:8.4f} {seconds:7.1f}s", flush=True)

    print(f"{'method':<9} {'features':<11} {'mean_ap':>8} {'onset':>8} {'wakeup':>8} {'time':>8}")
    t = time.perf_counter()
    record("rules", "-", score([e for s, _, _ in test for e in detect(s)[1]], test), time.perf_counter() - t)
    for kind in ("logistic", "forest"):
        for name, specs in FEATURE_SETS.items():
            t = time.perf_counter()
            record(kind, name, run_trained(kind, specs(), train, test, args), time.perf_counter() - t)

    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "features", "mean_ap", "onset_ap", "wakeup_ap", "seconds"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
