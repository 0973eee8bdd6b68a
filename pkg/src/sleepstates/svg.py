"""Dependency-free SVG charts: signal panes with sleep shading, and bar charts."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .model import Series, SleepWindow

SLEEP_COLOR = "#d62728"
AWAKE_COLOR = "#1f77b4"
_FONT = 'font-family="sans-serif" font-size="11"'


def _decimate(y: np.ndarray, max_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Min/max per bucket, so spikes survive the downsampling."""
    n = len(y)
    if n <= max_points:
        return np.arange(n, dtype=np.float64), y
    buckets = max_points // 2
    edges = np.linspace(0, n, buckets + 1).astype(int)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        seg = y[lo:hi]
        a, b = int(np.argmin(seg)), int(np.argmax(seg))
        for k in sorted((a, b)):
            xs.append(lo + k)
            ys.append(seg[k])
    return np.asarray(xs, dtype=np.float64), np.asarray(ys)


def _pane(
    name: str,
    y: np.ndarray,
    asleep: np.ndarray,
    spans: list[tuple[int, int]],
    top: float,
    width: float,
    height: float,
    max_points: int,
    first_step: int,
) -> list[str]:
    left, right = 60.0, 10.0
    plot_w = width - left - right
    n = len(y)
    lo, hi = (float(y.min()), float(y.max())) if n else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0
    sx = lambda i: left + plot_w * (i / max(n - 1, 1))
    sy = lambda v: top + height - height * (v - lo) / (hi - lo)

    out = [f'<g class="pane" id="pane-{name}">']
    out.append(f'<rect x="{left}" y="{top}" width="{plot_w:.1f}" height="{height}" fill="none" stroke="#888"/>')
    for s, e in spans:
        out.append(
            f'<rect class="sleep-span" x="{sx(s):.1f}" y="{top}" width="{max(sx(e) - sx(s), 0.5):.1f}" '
            f'height="{height}" fill="{SLEEP_COLOR}" fill-opacity="0.12"/>'
        )
    xs, ys = _decimate(y, max_points)
    state = asleep[xs.astype(int)] if n else np.zeros(0, bool)
    # one polyline per run of constant state, sharing endpoints so the line stays continuous
    start = 0
    for k in range(1, len(xs) + 1):
        if k == len(xs) or state[k] != state[start]:
            seg = range(start, min(k + 1, len(xs)))
            pts = " ".join(f"{sx(xs[j]):.1f},{sy(ys[j]):.1f}" for j in seg)
            color = SLEEP_COLOR if state[start] else AWAKE_COLOR
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="0.6"/>')
            start = k
    out.append(f'<text x="4" y="{top + 12}" {_FONT}>{escape(name)}</text>')
    out.append(f'<text x="{left - 4}" y="{top + 10}" text-anchor="end" {_FONT}>{hi:.3g}</text>')
    out.append(f'<text x="{left - 4}" y="{top + height}" text-anchor="end" {_FONT}>{lo:.3g}</text>')
    out.append(
        f'<text x="{left}" y="{top + height + 14}" {_FONT}>step {first_step}</text>'
        f'<text x="{width - right}" y="{top + height + 14}" text-anchor="end" {_FONT}>step {first_step + n - 1}</text>'
    )
    out.append("</g>")
    return out


def series_svg(
    series: Series,
    windows: Sequence[SleepWindow] = (),
    width: int = 1000,
    pane_height: int = 200,
    max_points: int = 4000,
) -> str:
    """anglez and enmo versus step; sleep stretches drawn red, awake blue."""
    n = len(series)
    asleep = np.zeros(n, dtype=bool)
    spans = []
    for w in windows:
        if w.series_id != series.series_id:
            continue
        s = max(0, series.index_of(w.onset_step))
        e = min(n, series.index_of(w.wakeup_step))
        if s < e:
            asleep[s:e] = True
            spans.append((s, e))
    gap = 40
    height = 30 + 2 * (pane_height + gap)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" {_FONT}>{escape(series.series_id)}: '
        f"anglez and enmo vs step (red = asleep, blue = awake)</text>",
    ]
    for k, (name, y) in enumerate((("anglez", series.anglez), ("enmo", series.enmo))):
        top = 30 + k * (pane_height + gap)
        parts += _pane(name, np.asarray(y), asleep, spans, top, width, pane_height, max_points, series.first_step if n else 0)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_svg(labels: Sequence[str], values: Sequence[float], title: str = "", width: int = 700, bar_height: int = 16) -> str:
    """Horizontal bar chart, largest value first."""
    order = np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")
    label_w = 170
    top = 30
    height = top + len(labels) * (bar_height + 4) + 10
    vmax = max(max(values, default=0.0), 1e-12)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" {_FONT}>{escape(title)}</text>',
    ]
    for row, i in enumerate(order):
        y = top + row * (bar_height + 4)
        bw = (width - label_w - 60) * values[i] / vmax
        parts.append(
            f'<text x="{label_w - 6}" y="{y + bar_height - 4}" text-anchor="end" {_FONT}>{escape(labels[i])}</text>'
            f'<rect class="bar" x="{label_w}" y="{y}" width="{bw:.1f}" height="{bar_height}" fill="{AWAKE_COLOR}"/>'
            f'<text x="{label_w + bw + 4:.1f}" y="{y + bar_height - 4}" {_FONT}>{values[i]:.3f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
