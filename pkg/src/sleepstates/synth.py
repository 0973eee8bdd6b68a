"""Seeded synthetic actigraphy with known sleep windows.

Awake samples are independent Gaussian draws around a neutral arm angle (a
diffusion-like, high-frequency signal). Asleep samples follow a slow,
mean-reverting random walk around a posture angle that jumps at Poisson
times, which gives the low-frequency, jump-process look of real nights.
Each series starts at local noon, so day ``d`` holds night ``d + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from ._parallel import pmap
from .model import EventClass, LabeledEvent, ScoringInterval, Series, night_days, to_datetime

_TRUNCATE_SD = 2.5


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 7
    cadence_seconds: int = 5
    sleep_onset_hour_mean: float = 22.5
    sleep_onset_hour_std: float = 1.0
    sleep_duration_mean: float = 9.0
    sleep_duration_std: float = 1.0
    sigma_sleep_deg: float = 1.0
    sigma_wake_deg: float = 25.0
    posture_change_rate_per_hour: float = 2.0
    posture_std_deg: float = 10.0
    sleep_reversion: float = 0.02
    enmo_wake_mean: float = 0.05
    enmo_sleep_mean: float = 0.005
    # (start hour counted from the series start, duration in minutes)
    nonwear_segments: tuple[tuple[float, float], ...] = ()
    start: str = "2023-01-01T12:00:00"
    utc_offset_hours: float = -4.0
    series_id: str = "synth000"
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nonwear_segments", tuple(tuple(map(float, s)) for s in self.nonwear_segments))
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if self.cadence_seconds <= 0:
            raise ValueError("cadence_seconds must be positive")
        for name in (
            "sleep_onset_hour_std",
            "sleep_duration_std",
            "sigma_sleep_deg",
            "sigma_wake_deg",
            "posture_change_rate_per_hour",
            "posture_std_deg",
            "enmo_wake_mean",
            "enmo_sleep_mean",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.sleep_duration_mean > 0.5:
            raise ValueError("sleep_duration_mean must exceed the 30 minute minimum window")
        if not 0 < self.sleep_reversion < 1:
            raise ValueError("sleep_reversion must be in (0, 1)")
        for start, dur in self.nonwear_segments:
            if start < 0 or dur <= 0:
                raise ValueError(f"bad non-wear segment ({start}, {dur})")


def _truncnorm(rng: np.random.Generator, mean: float, sd: float) -> float:
    if sd == 0:
        return mean
    while True:
        z = rng.standard_normal()
        if abs(z) <= _TRUNCATE_SD:
            return mean + sd * z


def _schedule(cfg: SynthConfig, rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    """Per-night (onset index, wakeup index), one per day, non-overlapping."""
    per_hour = 3600 / cfg.cadence_seconds
    min_len = int(np.ceil(0.5 * per_hour))
    out = []
    prev_end = 0
    for d in range(cfg.n_days):
        onset_h = _truncnorm(rng, cfg.sleep_onset_hour_mean, cfg.sleep_onset_hour_std)
        dur_h = max(_truncnorm(rng, cfg.sleep_duration_mean, cfg.sleep_duration_std), 0.5)
        # series starts at noon, so hour-of-day h sits (h - 12) hours into day d
        onset = int(round((d * 24 + onset_h - 12) * per_hour))
        wake = onset + max(int(round(dur_h * per_hour)), min_len)
        # keep a quiet margin at both ends of the recording
        onset = max(onset, prev_end + min_len, 1)
        wake = min(wake, n - min_len)
        if wake - onset < min_len:
            continue
        out.append((onset, wake))
        prev_end = wake
    return out


def _sleep_signal(cfg: SynthConfig, rng: np.random.Generator, length: int) -> np.ndarray:
    scale = np.sqrt(cfg.cadence_seconds / 5)
    step_sd = cfg.sigma_sleep_deg * scale
    jump_p = min(1.0, cfg.posture_change_rate_per_hour * cfg.cadence_seconds / 3600)
    jumps = rng.random(length) < jump_p
    postures = rng.normal(0.0, cfg.posture_std_deg, size=int(jumps.sum()) + 1)
    centre = postures[np.cumsum(jumps)]
    noise = rng.normal(0.0, step_sd, size=length)
    phi = 1.0 - cfg.sleep_reversion
    out = np.empty(length)
    dev = 0.0
    for i in range(length):
        if jumps[i]:
            dev = 0.0
        dev = phi * dev + noise[i]
        out[i] = dev
    return centre + out


def _reflect(a: np.ndarray) -> np.ndarray:
    # fold into [-90, 90] without creating flat runs at the bounds
    y = np.mod(a + 90.0, 360.0)
    return np.where(y > 180.0, 360.0 - y, y) - 90.0


def generate(cfg: SynthConfig) -> tuple[Series, list[LabeledEvent], list[ScoringInterval]]:
    rng = np.random.default_rng(cfg.rng_seed)
    cad = cfg.cadence_seconds
    n = int(cfg.n_days * 86400 // cad)
    nights = _schedule(cfg, rng, n)

    nonwear = []
    for start_h, dur_min in cfg.nonwear_segments:
        s = int(round(start_h * 3600 / cad))
        e = min(n, s + int(round(dur_min * 60 / cad)))
        if s >= n:
            raise ValueError(f"non-wear segment at hour {start_h} starts after the series ends")
        for k, (on, off) in enumerate(nights):
            if s < off and on < e:
                raise ValueError(
                    f"non-wear segment at hour {start_h} ({dur_min} min) collides with night {k + 1}"
                )
        nonwear.append((s, e))

    anglez = rng.normal(0.0, cfg.sigma_wake_deg, size=n)
    enmo = rng.normal(cfg.enmo_wake_mean, cfg.enmo_wake_mean, size=n)
    for on, off in nights:
        anglez[on:off] = _sleep_signal(cfg, rng, off - on)
        enmo[on:off] = rng.normal(cfg.enmo_sleep_mean, cfg.enmo_sleep_mean, size=off - on)
    anglez = np.round(_reflect(anglez), 4)
    enmo = np.round(np.maximum(enmo, 0.0), 4)
    for s, e in nonwear:
        anglez[s:e] = anglez[s - 1] if s > 0 else 0.0
        enmo[s:e] = 0.0

    offset = int(round(cfg.utc_offset_hours * 3600))
    tz = timezone(timedelta(seconds=offset))
    start = datetime.fromisoformat(cfg.start).replace(tzinfo=tz)
    epoch = int(start.timestamp()) + np.arange(n, dtype=np.int64) * cad
    series = Series(cfg.series_id, np.arange(n), epoch, np.full(n, offset), anglez, enmo, cad)

    days = night_days(series)
    events = []
    for on, off in nights:
        night = int(days[on] - days[0]) + 1
        events.append(LabeledEvent(cfg.series_id, night, EventClass.ONSET, on, to_datetime(epoch[on], offset)))
        events.append(LabeledEvent(cfg.series_id, night, EventClass.WAKEUP, off, to_datetime(epoch[off], offset)))

    intervals = []
    cursor = 0
    for s, e in sorted(nonwear):
        if s > cursor:
            intervals.append(ScoringInterval(cfg.series_id, cursor, s))
        cursor = max(cursor, e)
    if cursor < n:
        intervals.append(ScoringInterval(cfg.series_id, cursor, n))
    return series, events, intervals


def generate_corpus(
    cfg: SynthConfig, n_series: int, seed: int = 0, threads: int = 1
) -> list[tuple[Series, list[LabeledEvent], list[ScoringInterval]]]:
    """``n_series`` independent series with seeds derived from (seed, index)."""
    seeds = np.random.SeedSequence(seed).generate_state(n_series, dtype=np.uint32)
    cfgs = [
        replace(cfg, series_id=f"synth{i:03d}", rng_seed=int(seeds[i])) for i in range(n_series)
    ]
    return pmap(generate, cfgs, threads)
