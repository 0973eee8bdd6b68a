#!/usr/bin/env python3
"""Draw the two reference figures as SVG.

series.svg      anglez and enmo of one synthetic series, ground-truth sleep in red
importance.svg  forest feature importances on the default feature set
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from sleepstates.classifiers import TrainConfig, make_labels
from sleepstates.classifiers.forest import feature_importance, train_forest
from sleepstates.features import build_features, stack
from sleepstates.model import EventClass, SleepWindow
from sleepstates.svg import bar_svg, series_svg
from sleepstates.synth import SynthConfig, generate_corpus


def truth_windows(series, events):
    on = {e.night: e.step for e in events if e.event is EventClass.ONSET}
    off = {e.night: e.step for e in events if e.event is EventClass.WAKEUP}
    return [SleepWindow(series.series_id, on[k], off[k], k) for k in sorted(on) if k in off]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--n-series", type=int, default=5)
    ap.add_argument("--n-days", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(
        SynthConfig(n_days=args.n_days, nonwear_segments=((2.0, 120),)), args.n_series, args.seed, args.threads
    )

    series, events, _ = corpus[0]
    (out / "series.svg").write_text(series_svg(series, truth_windows(series, events)))

    X, names = stack([build_features(s, threads=args.threads) for s, _, _ in corpus])
    y = np.concatenate([make_labels(s, ev) for s, ev, _ in corpus])
    model = train_forest(X[::12], y[::12], names, TrainConfig(), threads=args.threads)
    imp = feature_importance(model)
    (out / "importance.svg").write_text(
        bar_svg(list(imp), list(imp.values()), "Random forest feature importance (Gini decrease)")
    )
    top = sorted(imp.items(), key=lambda kv: -kv[1])[:6]
    print("top features:", ", ".join(f"{k} {v:.3f}" for k, v in top))
    print(f"wrote {out / 'series.svg'} and {out / 'importance.svg'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
