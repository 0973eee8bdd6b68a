"""Per-step sleep/wake classifiers trained on feature matrices."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..model import EventClass, LabeledEvent, Series

MODEL_FORMAT = "sleepstates-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 300
    # "balanced", "uniform", or "w0,w1"
    class_weight_mode: str = "balanced"
    n_estimators: int = 50
    min_samples_leaf: int = 100
    max_depth: int = 12
    features_per_split: int | None = None  # None -> floor(sqrt(n_features))
    rng_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")
        self.explicit_weights()

    def explicit_weights(self) -> tuple[float, float] | None:
        mode = self.class_weight_mode.strip().lower()
        if mode in ("balanced", "uniform"):
            return None
        try:
            w0, w1 = (float(v) for v in mode.split(","))
        except ValueError:
            raise ValueError(
                f"class_weight_mode must be balanced, uniform or 'w0,w1'; got {self.class_weight_mode!r}"
            ) from None
        if not (w0 > 0 and w1 > 0):
            raise ValueError("explicit class weights must be > 0")
        return w0, w1


def class_weights(y: np.ndarray, cfg: TrainConfig) -> tuple[float, float]:
    """Per-class loss weights; balanced gives class c the weight n / (2 n_c)."""
    explicit = cfg.explicit_weights()
    if explicit is not None:
        return explicit
    if cfg.class_weight_mode.strip().lower() == "uniform":
        return 1.0, 1.0
    n = len(y)
    n1 = int(np.sum(y))
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        missing = "0 (awake)" if n0 == 0 else "1 (asleep)"
        raise ValueError(f"balanced class weights need both classes; label {missing} is missing")
    return n / (2 * n0), n / (2 * n1)


def label_steps(steps: np.ndarray, series_id: str, events: Sequence[LabeledEvent]) -> tuple[np.ndarray, int]:
    """1 on [onset, wakeup) for every complete night of ``series_id``.

    Returns the labels and the number of nights dropped for being unpaired
    or reversed.
    """
    steps = np.asarray(steps, dtype=np.int64)
    nights: dict[int, dict[EventClass, int]] = defaultdict(dict)
    for ev in events:
        if ev.series_id == series_id:
            nights[ev.night][ev.event] = ev.step
    y = np.zeros(len(steps), dtype=np.int8)
    dropped = 0
    for pair in nights.values():
        on, off = pair.get(EventClass.ONSET), pair.get(EventClass.WAKEUP)
        if on is None or off is None or off <= on:
            dropped += 1
            continue
        y[(steps >= on) & (steps < off)] = 1
    return y, dropped


def make_labels(series: Series, events: Sequence[LabeledEvent]) -> np.ndarray:
    y, _ = label_steps(series.step, series.series_id, events)
    return y


def check_columns(expected: Sequence[str], got: Sequence[str]) -> list[int]:
    """Column positions of ``expected`` inside ``got``; raises listing any mismatch."""
    missing = [c for c in expected if c not in got]
    extra = [c for c in got if c not in expected]
    if missing or extra:
        raise ValueError(f"feature columns differ from training: missing {missing}, extra {extra}")
    pos = {c: i for i, c in enumerate(got)}
    return [pos[c] for c in expected]


def save_model(model, path) -> None:
    """Write a model as versioned JSON; floats round-trip exactly."""
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, **model.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False, separators=(",", ":"))
        fh.write("\n")


def load_model(path):
    from .forest import ForestModel
    from .logistic import LogisticModel

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    kind = doc.get("kind")
    if kind == "logistic":
        return LogisticModel.from_dict(doc)
    if kind == "forest":
        return ForestModel.from_dict(doc)
    raise ValueError(f"unknown model kind {kind!r}")
