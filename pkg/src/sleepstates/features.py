"""Rolling-statistic features over trailing windows.

All rolling operations use right-aligned windows that shrink at the start of
the series, so ``out[i]`` summarises ``x[max(0, i - w + 1) : i + 1]`` and no
padding value ever reaches the feature matrix.

The implementation splits the (front-padded) signal into blocks of length
``w``. Any window of length ``w`` is then either exactly one block, or the
suffix of one block joined to the prefix of the next, so block-wise prefix
and suffix aggregates give every window in O(1) each (the van Herk/Gil-Werman
trick). Each column therefore costs O(n) regardless of window length and is
fully vectorised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .model import DEFAULT_CADENCE_SECONDS, Series

DEFAULT_WINDOWS_MIN = (5, 30, 120, 480)


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-d vector")
    return x


def _check_window(w: int, minimum: int = 1) -> int:
    w = int(w)
    if w < minimum:
        raise ValueError(f"window must be >= {minimum}, got {w}")
    return w


def _blocked(x: np.ndarray, w: int, fill: float) -> np.ndarray:
    """Front-pad ``x`` with w-1 fills, tail-pad to a multiple of w, reshape (nb, w)."""
    n = len(x)
    m = n + w - 1
    nb = -(-m // w)
    y = np.full(nb * w, fill, dtype=np.float64)
    y[w - 1 : w - 1 + n] = x
    return y.reshape(nb, w)


def _suffix(a: np.ndarray, ufunc) -> np.ndarray:
    return ufunc.accumulate(a[:, ::-1], axis=1)[:, ::-1]


def rolling_max(x, w: int) -> np.ndarray:
    x = _as_vector(x)
    w = _check_window(w)
    n = len(x)
    if n == 0:
        return x.copy()
    w = min(w, n)
    b = _blocked(x, w, -np.inf)
    prefix = np.maximum.accumulate(b, axis=1).ravel()
    suffix = _suffix(b, np.maximum).ravel()
    return np.maximum(suffix[:n], prefix[w - 1 : w - 1 + n])


def _rolling_sum(x: np.ndarray, w: int) -> np.ndarray:
    """Trailing-window sum; exact enough for non-negative input (no cancellation)."""
    n = len(x)
    w = min(w, n)
    b = _blocked(x, w, 0.0)
    prefix = np.cumsum(b, axis=1).ravel()
    suffix = _suffix(b, np.add).ravel()
    start = np.arange(n)
    whole = start % w == 0
    out = prefix[w - 1 : w - 1 + n] + np.where(whole, 0.0, suffix[:n])
    return out


def _rolling_moments(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-window (count, mean, sum of squared deviations).

    Every block is centred on its first real sample before accumulating, and
    the two partial windows are merged with the pairwise (Chan et al.)
    update. Large offsets therefore cancel before any squaring happens.
    """
    n = len(x)
    w = min(w, n)
    b = _blocked(x, w, 0.0)
    wt = _blocked(np.ones(n), w, 0.0)
    first_real = np.argmax(wt > 0, axis=1)
    has_real = wt.any(axis=1)
    centre = np.where(has_real, b[np.arange(len(b)), first_real], 0.0)
    c = (b - centre[:, None]) * wt
    cc = c * c

    def parts(acc):
        pre = acc(wt), acc(c), acc(cc)
        return [p.ravel() for p in pre]

    pn, ps, pq = parts(lambda a: np.cumsum(a, axis=1))
    sn, ss, sq = parts(lambda a: _suffix(a, np.add))
    centre_flat = np.repeat(centre, w)

    start = np.arange(n)
    end = start + w - 1
    whole = start % w == 0

    # part A: suffix of the start block, or the full block when aligned
    na = np.where(whole, pn[end], sn[start])
    sa = np.where(whole, ps[end], ss[start])
    qa = np.where(whole, pq[end], sq[start])
    ca = np.where(whole, centre_flat[end], centre_flat[start])
    # part B: prefix of the following block, empty when aligned
    nb_ = np.where(whole, 0.0, pn[end])
    sb = np.where(whole, 0.0, ps[end])
    qb = np.where(whole, 0.0, pq[end])
    cb = centre_flat[end]

    with np.errstate(invalid="ignore", divide="ignore"):
        da = np.where(na > 0, sa / np.where(na > 0, na, 1.0), 0.0)
        db = np.where(nb_ > 0, sb / np.where(nb_ > 0, nb_, 1.0), 0.0)
        # below w*eps of the raw square sum the difference is rounding residue
        floor = w * np.finfo(np.float64).eps
        m2a = qa - sa * da
        m2a = np.where(m2a > floor * qa, m2a, 0.0)
        m2b = qb - sb * db
        m2b = np.where(m2b > floor * qb, m2b, 0.0)
        mean_a = ca + da
        mean_b = cb + db
        total = na + nb_
        delta = mean_b - mean_a
        frac_b = nb_ / total
        mean = np.where(nb_ > 0, mean_a + delta * frac_b, mean_a)
        m2 = m2a + m2b + np.where(nb_ > 0, delta * delta * na * frac_b, 0.0)
    return total, mean, m2


def rolling_mean(x, w: int) -> np.ndarray:
    x = _as_vector(x)
    w = _check_window(w)
    if len(x) == 0:
        return x.copy()
    return _rolling_moments(x, w)[1]


def rolling_std(x, w: int) -> np.ndarray:
    """Population (divide-by-n) standard deviation over each trailing window."""
    x = _as_vector(x)
    w = _check_window(w)
    if len(x) == 0:
        return x.copy()
    count, _, m2 = _rolling_moments(x, w)
    return np.sqrt(m2 / count)


def total_variation(x, w: int) -> np.ndarray:
    """Sum of |x[j] - x[j-1]| over the trailing window of ``w`` samples ending at i."""
    x = _as_vector(x)
    w = _check_window(w, 2)
    if len(x) == 0:
        return x.copy()
    d = np.empty_like(x)
    d[0] = 0.0
    np.abs(np.diff(x), out=d[1:])
    return _rolling_sum(d, w - 1)


def hour_of_day(series: Series) -> np.ndarray:
    local = series.epoch + series.utc_offset
    return (np.mod(local, 86400) // 3600).astype(np.float64)


# -- feature specs ---------------------------------------------------------


class Channel(str, enum.Enum):
    ANGLEZ = "anglez"
    ENMO = "enmo"


class Stat(str, enum.Enum):
    MEAN = "mean"
    MAX = "max"
    STD = "std"
    TOTAL_VARIATION = "tv"


_STAT_FUNCS = {
    Stat.MEAN: rolling_mean,
    Stat.MAX: rolling_max,
    Stat.STD: rolling_std,
    Stat.TOTAL_VARIATION: total_variation,
}


@dataclass(frozen=True)
class FeatureSpec:
    channel: Channel
    stat: Stat
    window_steps: int

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel(self.channel))
        object.__setattr__(self, "stat", Stat(self.stat))
        _check_window(self.window_steps, 2 if self.stat is Stat.TOTAL_VARIATION else 1)

    def minutes(self, cadence_seconds: int = DEFAULT_CADENCE_SECONDS) -> float:
        return self.window_steps * cadence_seconds / 60

    def name(self, cadence_seconds: int = DEFAULT_CADENCE_SECONDS) -> str:
        return f"{self.channel.value}_{self.minutes(cadence_seconds):g}m_{self.stat.value}"

    def compute(self, series: Series) -> np.ndarray:
        x = series.anglez if self.channel is Channel.ANGLEZ else series.enmo
        return _STAT_FUNCS[self.stat](x, self.window_steps)


def make_specs(
    windows_min: Sequence[float] = DEFAULT_WINDOWS_MIN,
    stats: Sequence[Stat | str] = (Stat.MEAN, Stat.MAX, Stat.STD),
    channels: Sequence[Channel | str] = (Channel.ANGLEZ, Channel.ENMO),
    cadence_seconds: int = DEFAULT_CADENCE_SECONDS,
) -> list[FeatureSpec]:
    out = []
    for minutes in windows_min:
        steps = max(2, int(round(minutes * 60 / cadence_seconds)))
        for ch in channels:
            for st in stats:
                out.append(FeatureSpec(Channel(ch), Stat(st), steps))
    return out


def default_specs(cadence_seconds: int = DEFAULT_CADENCE_SECONDS) -> list[FeatureSpec]:
    """{anglez, enmo} x {mean, max, std} x {5, 30, 120, 480} min: 24 columns."""
    return make_specs(cadence_seconds=cadence_seconds)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    series_id: str
    steps: np.ndarray
    column_names: tuple[str, ...]
    values: np.ndarray  # (n_steps, n_features)

    def __post_init__(self):
        object.__setattr__(self, "column_names", tuple(self.column_names))
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape != (len(self.steps), len(self.column_names)):
            raise ValueError(
                f"values shape {v.shape} does not match {len(self.steps)} steps x {len(self.column_names)} columns"
            )
        if not np.isfinite(v).all():
            raise ValueError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def n_features(self) -> int:
        return len(self.column_names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.column_names.index(n) for n in names]
        return FeatureMatrix(self.series_id, self.steps, tuple(names), self.values[:, idx])


def build_features(
    series: Series,
    specs: Sequence[FeatureSpec] | None = None,
    include_hour: bool = True,
    threads: int = 1,
) -> FeatureMatrix:
    """One column per spec (named ``<channel>_<minutes>m_<stat>``), then ``hour``."""
    if specs is None:
        specs = default_specs(series.cadence_seconds)
    names = [s.name(series.cadence_seconds) for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate feature names in spec list")
    cols = pmap(lambda s: s.compute(series), specs, threads)
    if include_hour:
        names.append("hour")
        cols.append(hour_of_day(series))
    values = np.column_stack(cols) if cols else np.empty((len(series), 0))
    return FeatureMatrix(series.series_id, series.step.copy(), tuple(names), values)


def stack(matrices: Sequence[FeatureMatrix]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Row-concatenate matrices that share a column layout."""
    if not matrices:
        raise ValueError("no feature matrices to stack")
    names = matrices[0].column_names
    for m in matrices[1:]:
        if m.column_names != names:
            raise ValueError(f"column layout of {m.series_id} differs from {matrices[0].series_id}")
    return np.vstack([m.values for m in matrices]), names
