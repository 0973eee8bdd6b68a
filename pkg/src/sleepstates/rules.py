"""Model-free sleep window detector.

Inactivity follows the arm-angle heuristic from the actigraphy literature: the
wrist is considered still while the 5-minute median of the absolute per-step
change in anglez stays under a few degrees. Inactive runs are merged across
short activity bouts, filtered by minimum length, kept away from non-wear
spans, and reduced to the longest window per night.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import rolling_std
from .model import (
    DEFAULT_CADENCE_SECONDS,
    EventClass,
    ScoredEvent,
    Series,
    SleepWindow,
    keep_long_runs,
    minutes_to_steps,
    night_days,
    runs,
)

FLANK_MIN = 30


@dataclass(frozen=True)
class DetectorConfig:
    angle_change_threshold_deg: float = 5.0
    smoothing_window_min: float = 5
    min_window_min: float = 30
    max_interruption_min: float = 30
    nonwear_std_threshold_deg: float = 0.05
    nonwear_min_duration_min: float = 60
    night_boundary_hour: int = 12

    def __post_init__(self):
        for name in (
            "angle_change_threshold_deg",
            "smoothing_window_min",
            "min_window_min",
            "max_interruption_min",
            "nonwear_std_threshold_deg",
            "nonwear_min_duration_min",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 <= self.night_boundary_hour <= 23:
            raise ValueError("night_boundary_hour must be in [0, 23]")


def _centered_median(x: np.ndarray, w: int, chunk: int = 65536) -> np.ndarray:
    """Median over [i - (w-1)//2, i + w//2], clipped at the series edges.

    O(n*w) via partition on a strided view, which is cheap for the short
    windows used here (60 steps by default).
    """
    n = len(x)
    out = np.empty(n)
    lo_off, hi_off = (w - 1) // 2, w // 2
    if n >= w:
        view = np.lib.stride_tricks.sliding_window_view(x, w)
        for s in range(0, len(view), chunk):
            out[lo_off + s : lo_off + s + len(view[s : s + chunk])] = np.median(view[s : s + chunk], axis=1)
        edges = list(range(min(lo_off, n))) + list(range(max(n - hi_off, 0), n))
    else:
        edges = range(n)
    for i in edges:
        out[i] = np.median(x[max(0, i - lo_off) : min(n, i + hi_off + 1)])
    return out


def inactivity_mask(series: Series, cfg: DetectorConfig = DetectorConfig()) -> np.ndarray:
    w = minutes_to_steps(cfg.smoothing_window_min, series.cadence_seconds)
    change = np.zeros(len(series))
    if len(series) > 1:
        change[1:] = np.abs(np.diff(series.anglez))
    still = _centered_median(change, w) < cfg.angle_change_threshold_deg
    return keep_long_runs(still, w)


def nonwear_mask(series: Series, cfg: DetectorConfig = DetectorConfig()) -> np.ndarray:
    """True on spans where anglez is flat for at least ``nonwear_min_duration_min``.

    A full trailing window whose std is under the threshold marks every
    sample it covers as flat.
    """
    n = len(series)
    w = minutes_to_steps(cfg.smoothing_window_min, series.cadence_seconds)
    if n < w:
        return np.zeros(n, dtype=bool)
    low = rolling_std(series.anglez, w) < cfg.nonwear_std_threshold_deg
    low[: w - 1] = False
    # flat[j] iff some low window end lies in [j, j + w - 1]
    c = np.concatenate(([0], np.cumsum(low)))
    j = np.arange(n)
    flat = c[np.minimum(j + w, n)] - c[j] > 0
    return keep_long_runs(flat, minutes_to_steps(cfg.nonwear_min_duration_min, series.cadence_seconds))


def assemble_windows(
    inactive: np.ndarray,
    nonwear: np.ndarray,
    cfg: DetectorConfig = DetectorConfig(),
    *,
    cadence_seconds: int = DEFAULT_CADENCE_SECONDS,
    series_id: str = "",
    first_step: int = 0,
) -> list[SleepWindow]:
    """Merge inactive runs across short gaps, then apply length and wear rules.

    Non-wear steps never count as sleep, and a gap containing non-wear is
    never bridged, so no window can touch a non-wear span.
    """
    inactive = np.asarray(inactive, dtype=bool)
    nonwear = np.asarray(nonwear, dtype=bool)
    if inactive.shape != nonwear.shape:
        raise ValueError("inactivity and non-wear masks differ in length")
    max_gap = minutes_to_steps(cfg.max_interruption_min, cadence_seconds)
    min_len = minutes_to_steps(cfg.min_window_min, cadence_seconds)
    worn_cum = np.concatenate(([0], np.cumsum(nonwear)))

    merged: list[list[int]] = []
    for s, e in runs(inactive & ~nonwear):
        if merged:
            prev = merged[-1]
            if s - prev[1] <= max_gap and worn_cum[s] == worn_cum[prev[1]]:
                prev[1] = e
                continue
        merged.append([s, e])
    n = len(inactive)
    out = []
    for s, e in merged:
        # a run reaching the end of the recording wakes on its last sample
        e = min(e, n - 1)
        if e - s >= min_len and worn_cum[e] == worn_cum[s]:
            out.append(SleepWindow(series_id, first_step + s, first_step + e))
    return out


def select_per_night(
    windows: list[SleepWindow], series: Series, cfg: DetectorConfig = DetectorConfig()
) -> list[SleepWindow]:
    """Keep the longest window per night, keyed by the onset's night.

    Nights are numbered from 1 for the night holding the series' first sample.
    Length ties go to the earlier onset.
    """
    if not windows:
        return []
    days = night_days(series, cfg.night_boundary_hour)
    best: dict[int, SleepWindow] = {}
    for win in sorted(windows, key=lambda w: w.onset_step):
        day = int(days[series.index_of(win.onset_step)])
        cur = best.get(day)
        if cur is None or win.n_steps > cur.n_steps:
            best[day] = win
    first = int(days[0])
    return [
        SleepWindow(series.series_id, w.onset_step, w.wakeup_step, day - first + 1)
        for day, w in sorted(best.items())
    ]


def _contrast(values: np.ndarray, lo: int, hi: int, flank: int) -> float:
    inside = float(values[lo:hi].mean())
    around = np.concatenate((values[max(0, lo - flank) : lo], values[hi : hi + flank]))
    outside = float(around.mean()) if len(around) else 0.0
    return min(1.0, max(0.0, inside - outside))


def window_events(
    windows: list[SleepWindow], series: Series, score: np.ndarray, flank_min: float = FLANK_MIN
) -> list[tuple[SleepWindow, float]]:
    """Pair each window with its contrast: mean score inside minus mean over the flanks."""
    flank = minutes_to_steps(flank_min, series.cadence_seconds)
    out = []
    for win in windows:
        lo, hi = series.index_of(win.onset_step), series.index_of(win.wakeup_step)
        out.append((win, _contrast(score, lo, hi, flank)))
    return out


def detect(series: Series, cfg: DetectorConfig = DetectorConfig()) -> tuple[list[SleepWindow], list[ScoredEvent]]:
    inactive = inactivity_mask(series, cfg)
    nonwear = nonwear_mask(series, cfg)
    windows = assemble_windows(
        inactive,
        nonwear,
        cfg,
        cadence_seconds=series.cadence_seconds,
        series_id=series.series_id,
        first_step=series.first_step,
    )
    windows = select_per_night(windows, series, cfg)
    events = []
    for win, conf in window_events(windows, series, inactive.astype(np.float64)):
        events.append(ScoredEvent(series.series_id, EventClass.ONSET, win.onset_step, conf))
        events.append(ScoredEvent(series.series_id, EventClass.WAKEUP, win.wakeup_step, conf))
    return windows, events
