"""Domain types shared across the package, plus validation and night keying."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_CADENCE_SECONDS = 5
DEFAULT_NIGHT_BOUNDARY_HOUR = 12
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S%z"

_EPOCH_DAY = date(1970, 1, 1).toordinal()


class EventClass(str, enum.Enum):
    ONSET = "onset"
    WAKEUP = "wakeup"

    @classmethod
    def parse(cls, text: str) -> "EventClass":
        return cls(text.strip().lower())


# -- timestamps ------------------------------------------------------------

_day_cache: dict[str, int] = {}


def _parse_offset(text: str) -> int:
    if text in ("Z", "z"):
        return 0
    sign = -1 if text[0] == "-" else 1
    body = text[1:].replace(":", "")
    if len(body) != 4 or not body.isdigit() or text[0] not in "+-":
        raise ValueError(f"bad utc offset {text!r}")
    return sign * (int(body[:2]) * 3600 + int(body[2:]) * 60)


def parse_timestamp(text: str) -> tuple[int, int]:
    """Parse ``%Y-%m-%dT%H:%M:%S%z`` into (utc epoch seconds, utc offset seconds).

    Day-level arithmetic is cached since series repeat the same date thousands
    of times.
    """
    text = text.strip()
    if len(text) < 20 or text[10] not in "T ":
        raise ValueError(f"bad timestamp {text!r}")
    day = text[:10]
    days = _day_cache.get(day)
    if days is None:
        days = date.fromisoformat(day).toordinal() - _EPOCH_DAY
        _day_cache[day] = days
    hh, mm, ss = text[11:13], text[14:16], text[17:19]
    if text[13] != ":" or text[16] != ":" or not (hh + mm + ss).isdigit():
        raise ValueError(f"bad timestamp {text!r}")
    offset = _parse_offset(text[19:])
    local = days * 86400 + int(hh) * 3600 + int(mm) * 60 + int(ss)
    return local - offset, offset


def format_timestamp(epoch: int, offset: int) -> str:
    tz = timezone(timedelta(seconds=int(offset)))
    return datetime.fromtimestamp(int(epoch), tz).strftime(TIMESTAMP_FORMAT)


def to_datetime(epoch: int, offset: int) -> datetime:
    return datetime.fromtimestamp(int(epoch), timezone(timedelta(seconds=int(offset))))


def from_datetime(ts: datetime) -> tuple[int, int]:
    if ts.tzinfo is None:
        raise ValueError("timestamps must carry a utc offset")
    offset = ts.utcoffset()
    return int(ts.timestamp()), int(offset.total_seconds())


# -- value types -----------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    step: int
    timestamp: datetime
    anglez: float
    enmo: float


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Series:
    """One subject's recording, stored column-wise.

    ``epoch`` holds UTC seconds and ``utc_offset`` the local offset of each
    sample, so local wall-clock time is ``epoch + utc_offset``.
    """

    series_id: str
    step: np.ndarray
    epoch: np.ndarray
    utc_offset: np.ndarray
    anglez: np.ndarray
    enmo: np.ndarray
    cadence_seconds: int = DEFAULT_CADENCE_SECONDS

    def __post_init__(self):
        n = len(self.step)
        for name, dtype in (
            ("step", np.int64),
            ("epoch", np.int64),
            ("utc_offset", np.int64),
            ("anglez", np.float64),
            ("enmo", np.float64),
        ):
            arr = _frozen(getattr(self, name), dtype)
            if arr.shape != (n,):
                raise ValueError(f"column {name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)
        if int(self.cadence_seconds) <= 0:
            raise ValueError("cadence_seconds must be positive")

    def __len__(self) -> int:
        return len(self.step)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return (
            self.series_id == other.series_id
            and self.cadence_seconds == other.cadence_seconds
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("step", "epoch", "utc_offset", "anglez", "enmo")
            )
        )

    @property
    def first_step(self) -> int:
        return int(self.step[0])

    def index_of(self, step: int) -> int:
        return int(step) - self.first_step

    def timestamp(self, i: int) -> datetime:
        return to_datetime(self.epoch[i], self.utc_offset[i])

    @property
    def samples(self) -> list[Sample]:
        return [
            Sample(int(s), self.timestamp(i), float(a), float(e))
            for i, (s, a, e) in enumerate(zip(self.step, self.anglez, self.enmo))
        ]

    @classmethod
    def from_samples(
        cls, series_id: str, samples: Sequence[Sample], cadence_seconds: int = DEFAULT_CADENCE_SECONDS
    ) -> "Series":
        pairs = [from_datetime(s.timestamp) for s in samples]
        return cls(
            series_id,
            [s.step for s in samples],
            [p[0] for p in pairs],
            [p[1] for p in pairs],
            [s.anglez for s in samples],
            [s.enmo for s in samples],
            cadence_seconds,
        )


@dataclass(frozen=True)
class LabeledEvent:
    series_id: str
    night: int
    event: EventClass
    step: int
    timestamp: datetime | None = None


@dataclass(frozen=True)
class ScoredEvent:
    series_id: str
    event: EventClass
    step: int
    confidence: float

    def __post_init__(self):
        if not np.isfinite(self.confidence) or self.confidence < 0:
            raise ValueError(f"confidence must be finite and >= 0, got {self.confidence}")
        if self.step < 0:
            raise ValueError(f"step must be >= 0, got {self.step}")


@dataclass(frozen=True)
class SleepWindow:
    series_id: str
    onset_step: int
    wakeup_step: int
    night: int | None = None

    def __post_init__(self):
        if not self.onset_step < self.wakeup_step:
            raise ValueError(
                f"window needs onset_step < wakeup_step, got {self.onset_step}..{self.wakeup_step}"
            )

    @property
    def n_steps(self) -> int:
        return self.wakeup_step - self.onset_step


@dataclass(frozen=True)
class ScoringInterval:
    series_id: str
    start_step: int
    end_step: int  # exclusive

    def __post_init__(self):
        if not self.start_step < self.end_step:
            raise ValueError("scoring interval needs start_step < end_step")

    def __contains__(self, step: int) -> bool:
        return self.start_step <= step < self.end_step


# -- operations ------------------------------------------------------------


class Violation(NamedTuple):
    index: int
    description: str


def validate_series(series: Series) -> list[Violation]:
    """Every invariant violation in ``series``; an empty list means valid."""
    out: list[Violation] = []
    n = len(series)
    if n == 0:
        return [Violation(-1, "empty series")]
    step = series.step
    for i in np.flatnonzero(step < 0):
        out.append(Violation(int(i), "negative step"))
    for i in np.flatnonzero(np.diff(step) != 1) + 1:
        out.append(Violation(int(i), f"step gap at index {i}"))
    dt = np.diff(series.epoch)
    for i in np.flatnonzero(np.abs(dt - series.cadence_seconds) > 1) + 1:
        out.append(Violation(int(i), f"timestamp jump of {int(dt[i - 1])} s at index {i}"))
    a, e = series.anglez, series.enmo
    for i in np.flatnonzero(~np.isfinite(a) | ~np.isfinite(e)):
        out.append(Violation(int(i), "non-finite value"))
    for i in np.flatnonzero(np.abs(a) > 90):
        out.append(Violation(int(i), f"anglez {a[i]} outside [-90, 90]"))
    for i in np.flatnonzero(e < 0):
        out.append(Violation(int(i), f"negative enmo at step {int(step[i])}"))
    out.sort(key=lambda v: v.index)
    return out


def night_of(ts: datetime, boundary_hour: int = DEFAULT_NIGHT_BOUNDARY_HOUR) -> date:
    """Calendar date of the boundary that opens the night containing ``ts``.

    Nights are half-open: [D at boundary_hour, D+1 at boundary_hour) -> D,
    evaluated in the timestamp's own offset.
    """
    if not 0 <= boundary_hour <= 23:
        raise ValueError("boundary_hour must be in [0, 23]")
    return (ts.replace(tzinfo=None) - timedelta(hours=boundary_hour)).date()


def night_days(series: Series, boundary_hour: int = DEFAULT_NIGHT_BOUNDARY_HOUR) -> np.ndarray:
    """Vectorised ``night_of`` as days since 1970-01-01, one per sample."""
    local = series.epoch + series.utc_offset - boundary_hour * 3600
    return np.floor_divide(local, 86400)


def window_duration(window: SleepWindow, cadence_seconds: int = DEFAULT_CADENCE_SECONDS) -> int:
    return (window.wakeup_step - window.onset_step) * int(cadence_seconds)


def minutes_to_steps(minutes: float, cadence_seconds: int = DEFAULT_CADENCE_SECONDS) -> int:
    return max(1, int(round(minutes * 60 / cadence_seconds)))


def runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open (start, end) index pairs of the True runs in a boolean mask."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return []
    edges = np.diff(np.concatenate(([0], m.view(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def keep_long_runs(mask: np.ndarray, min_len: int) -> np.ndarray:
    out = np.zeros(len(mask), dtype=bool)
    for s, e in runs(mask):
        if e - s >= min_len:
            out[s:e] = True
    return out
