"""Turn per-step sleep probabilities into scored onset/wakeup events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EventClass, ScoredEvent, Series, SleepWindow, minutes_to_steps, runs
from .rules import FLANK_MIN, DetectorConfig, assemble_windows, nonwear_mask, select_per_night, window_events


@dataclass(frozen=True)
class ExtractConfig:
    smooth_window_min: float = 10
    theta_on: float = 0.6
    theta_off: float = 0.4
    tau: float = 0.0
    min_window_min: float = 30
    max_interruption_min: float = 30
    night_boundary_hour: int = 12
    exclude_nonwear: bool = True

    def __post_init__(self):
        if not 0 <= self.theta_off <= self.theta_on <= 1:
            raise ValueError("need 0 <= theta_off <= theta_on <= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if not self.smooth_window_min > 0:
            raise ValueError("smooth_window_min must be > 0")
        # validates the shared post-rule fields
        self.detector()

    def detector(self) -> DetectorConfig:
        return DetectorConfig(
            min_window_min=self.min_window_min,
            max_interruption_min=self.max_interruption_min,
            night_boundary_hour=self.night_boundary_hour,
        )


def centered_mean(p: np.ndarray, w: int) -> np.ndarray:
    """Mean over [i - (w-1)//2, i + w//2], clipped at the edges."""
    n = len(p)
    c = np.concatenate(([0.0], np.cumsum(p)))
    i = np.arange(n)
    lo = np.maximum(0, i - (w - 1) // 2)
    hi = np.minimum(n, i + w // 2 + 1)
    return (c[hi] - c[lo]) / (hi - lo)


def hysteresis(x: np.ndarray, on: float, off: float) -> np.ndarray:
    """Enter when x > on, leave when x < off, otherwise hold; starts awake."""
    set_ = x > on
    reset = x < off
    marked = set_ | reset
    last = np.where(marked, np.arange(len(x)), -1)
    np.maximum.accumulate(last, out=last)
    return np.where(last >= 0, set_[np.maximum(last, 0)], False)


def _run_starts(mask: np.ndarray) -> np.ndarray:
    """Index where the constant run containing each position begins."""
    change = np.ones(len(mask), dtype=bool)
    change[1:] = mask[1:] != mask[:-1]
    return np.maximum.accumulate(np.where(change, np.arange(len(mask)), 0))


def snap_edges(asleep: np.ndarray, smooth: np.ndarray, mid: float) -> np.ndarray:
    """Move each sleep run's edges back to where ``smooth`` crosses ``mid``.

    Hysteresis enters late (above theta_on) and leaves late (below
    theta_off). Onsets move back to the first sample strictly above ``mid``
    and wakeups to the first sample strictly below it.
    """
    n = len(asleep)
    above, below = smooth > mid, smooth < mid
    above_start, below_start = _run_starts(above), _run_starts(below)
    out = np.zeros(n, dtype=bool)
    for s, e in runs(asleep):
        s2 = above_start[s] if above[s] else s
        e2 = below_start[e] if e < n and below[e] else e
        out[s2 : max(e2, s2)] = True
    return out


def _check_proba(p: np.ndarray, series: Series) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (len(series),):
        raise ValueError(f"probability vector has length {len(p)}, series has {len(series)}")
    if len(p) and (p.min() < 0 or p.max() > 1 or not np.isfinite(p).all()):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def extract_windows(p, series: Series, cfg: ExtractConfig = ExtractConfig()) -> list[SleepWindow]:
    p = _check_proba(p, series)
    if len(p) == 0:
        return []
    # centred so smoothing does not delay the transitions
    smooth = centered_mean(p, minutes_to_steps(cfg.smooth_window_min, series.cadence_seconds))
    asleep = hysteresis(smooth, cfg.theta_on, cfg.theta_off)
    asleep = snap_edges(asleep, smooth, 0.5 * (cfg.theta_on + cfg.theta_off))
    det = cfg.detector()
    nonwear = nonwear_mask(series) if cfg.exclude_nonwear else np.zeros(len(p), dtype=bool)
    windows = assemble_windows(
        asleep,
        nonwear,
        det,
        cadence_seconds=series.cadence_seconds,
        series_id=series.series_id,
        first_step=series.first_step,
    )
    return select_per_night(windows, series, det)


def window_midpoint(window: SleepWindow) -> int:
    return (window.onset_step + window.wakeup_step) // 2


def windows_to_events(
    windows: list[SleepWindow], p, series: Series, cfg: ExtractConfig = ExtractConfig()
) -> list[ScoredEvent]:
    """Onset and wakeup per window, kept only when the window's contrast exceeds tau."""
    p = _check_proba(p, series)
    out = []
    for win, conf in window_events(windows, series, p, FLANK_MIN):
        if conf > cfg.tau:
            out.append(ScoredEvent(series.series_id, EventClass.ONSET, win.onset_step, conf))
            out.append(ScoredEvent(series.series_id, EventClass.WAKEUP, win.wakeup_step, conf))
    return out


def extract(p, series: Series, cfg: ExtractConfig = ExtractConfig()) -> tuple[list[SleepWindow], list[ScoredEvent]]:
    windows = extract_windows(p, series, cfg)
    return windows, windows_to_events(windows, p, series, cfg)
