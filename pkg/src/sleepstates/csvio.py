"""Readers and writers for the series, events, predictions and interval CSVs.

Readers skip and count bad rows instead of aborting, so a multi-day file with
a handful of corrupt lines stays usable. Header problems are hard errors.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

from .model import (
    DEFAULT_CADENCE_SECONDS,
    EventClass,
    LabeledEvent,
    ScoredEvent,
    ScoringInterval,
    Series,
    SleepWindow,
    format_timestamp,
    parse_timestamp,
    to_datetime,
)

SERIES_HEADER = ["series_id", "step", "timestamp", "anglez", "enmo"]
EVENTS_HEADER = ["series_id", "night", "event", "step", "timestamp"]
PREDICTIONS_HEADER = ["row_id", "series_id", "step", "event", "score"]
INTERVALS_HEADER = ["series_id", "start_step", "end_step"]
WINDOWS_HEADER = ["series_id", "night", "onset_step", "wakeup_step"]
PROBA_HEADER = ["series_id", "step", "proba"]


class HeaderError(ValueError):
    """The first row of a CSV does not carry the expected columns."""


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_skipped: int = 0
    skip_reasons: Counter = field(default_factory=Counter)
    clamped_enmo: int = 0

    def skip(self, reason: str) -> None:
        self.rows_skipped += 1
        self.skip_reasons[reason] += 1


@contextmanager
def _text_in(source) -> Iterator[IO[str]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            yield fh
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        # binary stream
        wrapper = io.TextIOWrapper(source, encoding="utf-8", newline="")
        try:
            yield wrapper
        finally:
            wrapper.detach()


@contextmanager
def _text_out(sink) -> Iterator[IO[str]]:
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="", encoding="utf-8") as fh:
            yield fh
    elif isinstance(sink, io.TextIOBase):
        yield sink
    else:
        wrapper = io.TextIOWrapper(sink, encoding="utf-8", newline="")
        try:
            yield wrapper
        finally:
            wrapper.flush()
            wrapper.detach()


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _float(text: str) -> float:
    # spreadsheets sometimes export U+2212 as the minus sign
    return float(text.replace("\u2212", "-"))


def _check_header(row: list[str] | None, expected: list[str], what: str) -> None:
    got = [c.strip() for c in row] if row else []
    if got != expected:
        raise HeaderError(f"{what} header must be {','.join(expected)}; got {','.join(got) or '<empty>'}")


# -- series ----------------------------------------------------------------


def _infer_cadence(epoch: np.ndarray, default: int) -> int:
    if len(epoch) < 2:
        return default
    diffs = np.diff(epoch[: min(len(epoch), 1001)])
    vals, counts = np.unique(diffs, return_counts=True)
    best = int(vals[np.argmax(counts)])
    return best if best > 0 else default


def read_series_csv(source, cadence_seconds: int | None = None) -> tuple[list[Series], IngestReport]:
    """Parse a ``series_id,step,timestamp,anglez,enmo`` CSV.

    Rows are grouped by series id in first-appearance order and sorted by step
    within each series. Negative enmo is clamped to zero and counted. When
    ``cadence_seconds`` is None it is inferred from the modal timestamp delta.
    """
    report = IngestReport()
    cols: dict[str, tuple[list, list, list, list, list]] = {}
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), SERIES_HEADER, "series")
        for row in reader:
            if not row:
                continue
            report.rows_read += 1
            try:
                sid, step, ts, anglez, enmo = row
                step_i = int(step)
                epoch, offset = parse_timestamp(ts)
                a = _float(anglez)
                e = _float(enmo)
                if not (np.isfinite(a) and np.isfinite(e)):
                    raise ValueError("non-finite value")
            except ValueError:
                report.skip("parse")
                continue
            if e < 0:
                e = 0.0
                report.clamped_enmo += 1
            c = cols.get(sid)
            if c is None:
                c = cols[sid] = ([], [], [], [], [])
            c[0].append(step_i)
            c[1].append(epoch)
            c[2].append(offset)
            c[3].append(a)
            c[4].append(e)
    out = []
    for sid, (step, epoch, offset, a, e) in cols.items():
        step = np.asarray(step, dtype=np.int64)
        order = np.argsort(step, kind="stable")
        epoch = np.asarray(epoch, dtype=np.int64)[order]
        cad = cadence_seconds or _infer_cadence(epoch, DEFAULT_CADENCE_SECONDS)
        out.append(
            Series(
                sid,
                step[order],
                epoch,
                np.asarray(offset, dtype=np.int64)[order],
                np.asarray(a)[order],
                np.asarray(e)[order],
                cad,
            )
        )
    return out, report


def _timestamp_column(series: Series) -> list[str]:
    # consecutive samples share a date, so format the date part once per day
    out = []
    cache: dict[tuple[int, int], tuple[str, str]] = {}
    for epoch, off in zip(series.epoch.tolist(), series.utc_offset.tolist()):
        local = epoch + off
        day = local // 86400
        parts = cache.get((day, off))
        if parts is None:
            full = format_timestamp(epoch, off)
            parts = cache[(day, off)] = (full[:11], full[19:])
        sec = local - day * 86400
        out.append(f"{parts[0]}{sec // 3600:02d}:{sec % 3600 // 60:02d}:{sec % 60:02d}{parts[1]}")
    return out


def write_series_csv(series: Iterable[Series], sink) -> None:
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(SERIES_HEADER)
        for s in series:
            ts = _timestamp_column(s)
            w.writerows(
                zip(
                    [s.series_id] * len(s),
                    s.step.tolist(),
                    ts,
                    map(repr, s.anglez.tolist()),
                    map(repr, s.enmo.tolist()),
                )
            )


# -- events ----------------------------------------------------------------


def read_events_csv(source) -> tuple[list[LabeledEvent], IngestReport]:
    report = IngestReport()
    out = []
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), EVENTS_HEADER, "events")
        for row in reader:
            if not row:
                continue
            report.rows_read += 1
            if len(row) != 5:
                report.skip("parse")
                continue
            sid, night, event, step, ts = (c.strip() for c in row)
            try:
                kind = EventClass.parse(event)
            except ValueError:
                report.skip("bad_event")
                continue
            if step == "" or ts == "":
                report.skip("unlabeled_night")
                continue
            try:
                stamp = to_datetime(*parse_timestamp(ts))
                out.append(LabeledEvent(sid, int(night), kind, int(float(step)), stamp))
            except ValueError:
                report.skip("parse")
    return out, report


def write_events_csv(events: Iterable[LabeledEvent], sink) -> None:
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(EVENTS_HEADER)
        for ev in events:
            ts = ev.timestamp.strftime("%Y-%m-%dT%H:%M:%S%z") if ev.timestamp else ""
            w.writerow([ev.series_id, ev.night, ev.event.value, ev.step, ts])


# -- predictions -----------------------------------------------------------


def write_predictions(events: Iterable[ScoredEvent], sink) -> None:
    """Write the submission-shaped predictions CSV.

    Scores use Python's shortest round-trip float repr, so reading the file
    back reproduces every confidence bit for bit.
    """
    events = list(events)
    seen = set()
    for ev in events:
        key = (ev.series_id, ev.step, ev.event)
        if key in seen:
            raise ValueError(f"duplicate prediction {ev.series_id},{ev.step},{ev.event.value}")
        seen.add(key)
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(PREDICTIONS_HEADER)
        for i, ev in enumerate(events):
            w.writerow([i, ev.series_id, ev.step, ev.event.value, repr(float(ev.confidence))])


def read_predictions(source) -> list[ScoredEvent]:
    out = []
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), PREDICTIONS_HEADER, "predictions")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                _, sid, step, event, score = row
                out.append(ScoredEvent(sid, EventClass.parse(event), int(step), float(score)))
            except ValueError as exc:
                raise ValueError(f"predictions line {lineno}: {exc}") from None
    return out


# -- scoring intervals and windows ----------------------------------------


def write_intervals_csv(intervals: Iterable[ScoringInterval], sink) -> None:
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(INTERVALS_HEADER)
        for iv in intervals:
            w.writerow([iv.series_id, iv.start_step, iv.end_step])


def read_intervals_csv(source) -> list[ScoringInterval]:
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), INTERVALS_HEADER, "intervals")
        return [ScoringInterval(r[0], int(r[1]), int(r[2])) for r in reader if r]


def write_windows_csv(windows: Iterable[SleepWindow], sink) -> None:
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(WINDOWS_HEADER)
        for win in windows:
            w.writerow([win.series_id, "" if win.night is None else win.night, win.onset_step, win.wakeup_step])


def read_windows_csv(source) -> list[SleepWindow]:
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), WINDOWS_HEADER, "windows")
        return [
            SleepWindow(r[0], int(r[2]), int(r[3]), int(r[1]) if r[1] else None) for r in reader if r
        ]


# -- feature matrices and probabilities -----------------------------------


def write_table(sink, header: list[str], blocks: Iterable[tuple[str, np.ndarray, np.ndarray]]) -> None:
    """Write ``series_id,step,<columns>`` rows from (series_id, steps, values) blocks."""
    with _text_out(sink) as fh:
        w = _writer(fh)
        w.writerow(["series_id", "step", *header])
        for sid, steps, values in blocks:
            values = np.asarray(values, dtype=np.float64)
            if values.ndim == 1:
                values = values[:, None]
            for step, row in zip(steps.tolist(), values.tolist()):
                w.writerow([sid, step, *map(repr, row)])


def read_table(source) -> tuple[list[str], list[tuple[str, np.ndarray, np.ndarray]]]:
    """Inverse of :func:`write_table`; rows are grouped by series id."""
    groups: dict[str, tuple[list[int], list[list[float]]]] = {}
    with _text_in(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [c.strip() for c in header[:2]] != ["series_id", "step"] or len(header) < 3:
            raise HeaderError("table header must start with series_id,step and name at least one column")
        names = [c.strip() for c in header[2:]]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            g = groups.get(row[0])
            if g is None:
                g = groups[row[0]] = ([], [])
            try:
                g[0].append(int(row[1]))
                g[1].append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    blocks = [
        (sid, np.asarray(steps, dtype=np.int64), np.asarray(vals, dtype=np.float64).reshape(len(steps), len(names)))
        for sid, (steps, vals) in groups.items()
    ]
    return names, blocks
