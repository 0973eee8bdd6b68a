"""Event Detection Average Precision.

Scoring runs in four stages:

1. selection: optionally drop predictions outside a series' scoring intervals;
2. assignment: within each (series, event class), predictions in descending
   confidence greedily claim the nearest unclaimed ground truth closer than
   the tolerance;
3. scoring: per (event class, tolerance), the matches from every series are
   pooled into one precision-recall curve, and AP is its step-wise area;
4. reduction: the mean of AP over groups that have ground truth.

Tie rules: equal confidences rank the smaller step first, then input order;
equal distances go to the earlier ground truth.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._parallel import pmap
from .model import EventClass, ScoredEvent, ScoringInterval

DEFAULT_TOLERANCES = (12, 36, 60, 90, 120, 150, 180, 240, 300, 360)


def check_tolerances(tolerances: Iterable[int]) -> tuple[int, ...]:
    tols = tuple(int(t) for t in tolerances)
    if not tols:
        raise ValueError("tolerance list is empty")
    if any(t <= 0 for t in tols):
        raise ValueError("tolerances must be positive")
    if any(b <= a for a, b in zip(tols, tols[1:])):
        raise ValueError("tolerances must be strictly increasing")
    return tols


@dataclass(frozen=True, eq=False)
class MatchResult:
    """TP flags in ranking order, alongside the ranked predictions' keys."""

    flags: np.ndarray
    confidences: np.ndarray
    steps: np.ndarray
    order: np.ndarray  # input positions of the ranked predictions
    n_ground_truth: int

    @property
    def n_tp(self) -> int:
        return int(self.flags.sum())


def select_in_intervals(
    preds: Sequence[ScoredEvent], intervals: Sequence[ScoringInterval] | None
) -> list[ScoredEvent]:
    if intervals is None:
        return list(preds)
    by_series: dict[str, list[ScoringInterval]] = defaultdict(list)
    for iv in intervals:
        by_series[iv.series_id].append(iv)
    return [p for p in preds if any(p.step in iv for iv in by_series.get(p.series_id, ()))]


def _rank(conf: np.ndarray, steps: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # lexsort keys run last-to-first: confidence desc, then step, then input position
    return np.lexsort((idx, steps, -conf))


def _match_arrays(
    conf: np.ndarray, steps: np.ndarray, idx: np.ndarray, gt_steps: np.ndarray, tol: int
) -> MatchResult:
    ranked = _rank(conf, steps, idx)
    gt = np.sort(np.asarray(gt_steps, dtype=np.int64), kind="stable")
    free = np.ones(len(gt), dtype=bool)
    flags = np.zeros(len(ranked), dtype=bool)
    if len(gt):
        for k, i in enumerate(ranked):
            dist = np.abs(gt - steps[i]).astype(np.float64)
            dist[~free] = np.inf
            j = int(np.argmin(dist))
            if dist[j] < tol:
                free[j] = False
                flags[k] = True
    return MatchResult(flags, conf[ranked], steps[ranked], idx[ranked], len(gt))


def match_events(preds: Sequence[ScoredEvent], gts: Sequence, tol: int) -> MatchResult:
    """Greedy assignment for one series and one event class.

    ``gts`` may hold any objects with a ``step`` attribute.
    """
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    conf = np.array([p.confidence for p in preds], dtype=np.float64)
    steps = np.array([p.step for p in preds], dtype=np.int64)
    return _match_arrays(conf, steps, np.arange(len(preds)), np.array([g.step for g in gts]), tol)


def average_precision(m: MatchResult) -> float | None:
    """Step-wise area under the PR curve, sum of (R_k - R_{k-1}) * P_k.

    Returns None when there is no ground truth, since recall is undefined.
    """
    if m.n_ground_truth == 0:
        return None
    if len(m.flags) == 0:
        return 0.0
    tp = np.cumsum(m.flags)
    precision = tp / np.arange(1, len(tp) + 1)
    return float(precision[m.flags].sum() / m.n_ground_truth)


def _pool(results: Sequence[MatchResult]) -> MatchResult:
    if not results:
        return MatchResult(np.zeros(0, bool), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64), 0)
    flags = np.concatenate([r.flags for r in results])
    conf = np.concatenate([r.confidences for r in results])
    steps = np.concatenate([r.steps for r in results])
    order = np.concatenate([r.order for r in results])
    ranked = _rank(conf, steps, order)
    return MatchResult(flags[ranked], conf[ranked], steps[ranked], order[ranked], sum(r.n_ground_truth for r in results))


@dataclass
class EdapReport:
    tolerances: tuple[int, ...]
    ap: dict[tuple[EventClass, int], float | None]
    counts: dict[tuple[EventClass, int], tuple[int, int]]  # (n_gt, n_pred)
    mean_ap: float

    def rows(self) -> list[tuple[str, int, int, int, float | None]]:
        return [(ev.value, tol, *self.counts[(ev, tol)], ap) for (ev, tol), ap in self.ap.items()]

    def class_means(self) -> dict[EventClass, float | None]:
        out = {}
        for ev in EventClass:
            vals = [a for (e, _), a in self.ap.items() if e is ev and a is not None]
            out[ev] = float(np.mean(vals)) if vals else None
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "tolerance", "n_gt", "n_pred", "ap"])
        for ev, tol, n_gt, n_pred, ap in self.rows():
            w.writerow([ev, tol, n_gt, n_pred, "" if ap is None else repr(ap)])
        w.writerow(["mean_ap", "", "", "", repr(self.mean_ap)])
        return buf.getvalue()

    def to_text(self) -> str:
        classes = [ev for ev in EventClass]
        head = f"{'tolerance':>9}  " + "  ".join(f"{ev.value:>8}" for ev in classes)
        lines = [head, "-" * len(head)]
        fmt = lambda a: f"{'n/a':>8}" if a is None else f"{a:8.4f}"
        for tol in self.tolerances:
            lines.append(f"{tol:>9}  " + "  ".join(fmt(self.ap[(ev, tol)]) for ev in classes))
        means = self.class_means()
        lines.append("-" * len(head))
        lines.append(f"{'mean':>9}  " + "  ".join(fmt(means[ev]) for ev in classes))
        lines.append(f"EDAP (mean over groups with ground truth): {self.mean_ap:.4f}")
        return "\n".join(lines) + "\n"


def edap(
    preds: Sequence[ScoredEvent],
    gts: Sequence,
    tolerances: Iterable[int] = DEFAULT_TOLERANCES,
    intervals: Sequence[ScoringInterval] | None = None,
    threads: int = 1,
) -> EdapReport:
    """Score predictions against ground truth; ``gts`` need ``series_id``, ``event`` and ``step``."""
    tols = check_tolerances(tolerances)
    preds = select_in_intervals(preds, intervals)
    if not gts:
        raise ValueError("no ground-truth events to score against")

    pred_groups: dict[tuple[EventClass, str], list[int]] = defaultdict(list)
    for i, p in enumerate(preds):
        pred_groups[(p.event, p.series_id)].append(i)
    gt_groups: dict[tuple[EventClass, str], list[int]] = defaultdict(list)
    for g in gts:
        gt_groups[(g.event, g.series_id)].append(g.step)

    conf_all = np.array([p.confidence for p in preds], dtype=np.float64)
    step_all = np.array([p.step for p in preds], dtype=np.int64)

    def score(key: tuple[EventClass, int]) -> float | None:
        ev, tol = key
        sids = sorted({s for e, s in pred_groups if e is ev} | {s for e, s in gt_groups if e is ev})
        results = []
        for sid in sids:
            idx = np.array(pred_groups.get((ev, sid), []), dtype=np.int64)
            gt = np.array(gt_groups.get((ev, sid), []), dtype=np.int64)
            results.append(_match_arrays(conf_all[idx], step_all[idx], idx, gt, tol))
        return average_precision(_pool(results))

    keys = [(ev, tol) for ev in EventClass for tol in tols]
    aps = dict(zip(keys, pmap(score, keys, threads)))
    counts = {}
    for ev, tol in keys:
        n_gt = sum(len(v) for (e, _), v in gt_groups.items() if e is ev)
        n_pred = sum(len(v) for (e, _), v in pred_groups.items() if e is ev)
        counts[(ev, tol)] = (n_gt, n_pred)
    scored = [a for a in aps.values() if a is not None]
    if not scored:
        raise ValueError("no event class has ground truth")
    return EdapReport(tols, aps, counts, float(np.mean(scored)))


def brute_force_ap(preds: Sequence[ScoredEvent], gts: Sequence, tol: int) -> float | None:
    """Reference AP for one event class: rematch from scratch at every threshold.

    For each k, keep only the k best-ranked predictions, run the greedy
    nearest-match in plain Python over every series, and read off precision
    and recall. Quadratic-or-worse; only meant for small differential tests.
    """
    ranked = sorted(enumerate(preds), key=lambda t: (-t[1].confidence, t[1].step, t[0]))
    n_gt = len(gts)
    if n_gt == 0:
        return None
    truth: dict[str, list[int]] = defaultdict(list)
    for g in gts:
        truth[g.series_id].append(g.step)
    for sid in truth:
        truth[sid].sort()

    total = 0.0
    prev_recall = 0.0
    for k in range(1, len(ranked) + 1):
        tp = 0
        used = {sid: [False] * len(steps) for sid, steps in truth.items()}
        for _, p in ranked[:k]:
            steps = truth.get(p.series_id, [])
            best, best_d = None, None
            for j, s in enumerate(steps):
                if used[p.series_id][j]:
                    continue
                d = abs(s - p.step)
                if d < tol and (best_d is None or d < best_d):
                    best, best_d = j, d
            if best is not None:
                used[p.series_id][best] = True
                tp += 1
        recall = tp / n_gt
        total += (recall - prev_recall) * (tp / k)
        prev_recall = recall
    return total
