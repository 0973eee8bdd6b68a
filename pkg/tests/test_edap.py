import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sleepstates.edap import (
    average_precision,
    brute_force_ap,
    check_tolerances,
    edap,
    match_events,
    select_in_intervals,
)
from sleepstates.model import EventClass, LabeledEvent, ScoredEvent, ScoringInterval

ON, OFF = EventClass.ONSET, EventClass.WAKEUP


def pred(step, conf, event=ON, sid="s1"):
    return ScoredEvent(sid, event, step, conf)


def gt(step, event=ON, sid="s1", night=1):
    return LabeledEvent(sid, night, event, step)


HAND_GT = [gt(100), gt(500)]
HAND_PREDS = [pred(110, 0.9), pred(130, 0.8), pred(700, 0.7)]


def test_hand_matching():
    m = match_events(HAND_PREDS, HAND_GT, 30)
    assert m.flags.tolist() == [True, False, False]
    assert m.n_ground_truth == 2
    assert average_precision(m) == 0.5


def test_no_predictions():
    m = match_events([], HAND_GT, 30)
    assert len(m.flags) == 0 and m.n_ground_truth == 2
    assert average_precision(m) == 0.0


def test_exact_tolerance_distance_is_fp():
    assert match_events([pred(130, 1.0)], [gt(100)], 30).flags.tolist() == [False]
    assert match_events([pred(129, 1.0)], [gt(100)], 30).flags.tolist() == [True]


def test_negative_tolerance_rejected():
    with pytest.raises(ValueError):
        match_events([], [], -1)


def test_distance_tie_goes_to_earlier_gt():
    m = match_events([pred(50, 0.9), pred(59, 0.8)], [gt(40), gt(60)], 11)
    # 50 is equidistant and takes 40, leaving 60 for the second prediction
    assert m.flags.tolist() == [True, True]


def test_confidence_tie_ranks_smaller_step_first():
    m = match_events([pred(108, 0.5), pred(95, 0.5)], [gt(100)], 10)
    assert m.steps.tolist() == [95, 108]
    assert m.flags.tolist() == [True, False]


def test_perfect_detector():
    gts = [gt(s) for s in (10, 300, 900)]
    m = match_events([pred(g.step, 1.0 - i / 10) for i, g in enumerate(gts)], gts, 5)
    assert average_precision(m) == 1.0


def test_selection():
    preds = [pred(50, 0.5), pred(100, 0.5), pred(10, 0.5, sid="other")]
    assert select_in_intervals(preds, None) == preds
    assert select_in_intervals(preds, [ScoringInterval("s1", 0, 100)]) == [preds[0]]


def test_hand_report():
    rep = edap(HAND_PREDS, HAND_GT, tolerances=[5, 30])
    assert rep.ap[(ON, 30)] == 0.5
    assert rep.ap[(ON, 5)] == 0.0
    assert rep.ap[(OFF, 5)] is None
    assert rep.mean_ap == 0.25
    assert rep.to_csv().splitlines()[-1] == "mean_ap,,,,0.25"


def test_identical_predictions_score_one():
    gts = [gt(100), gt(900, OFF), gt(20000, sid="s2", night=1), gt(26000, OFF, sid="s2")]
    preds = [ScoredEvent(g.series_id, g.event, g.step, 1.0) for g in gts]
    rep = edap(preds, gts)
    assert rep.mean_ap == 1.0
    assert all(a == 1.0 for a in rep.ap.values())


def test_equal_class_aps_average_to_same():
    gts = [gt(100), gt(500), gt(200, OFF), gt(600, OFF)]
    preds = HAND_PREDS + [pred(210, 0.9, OFF), pred(230, 0.8, OFF), pred(800, 0.7, OFF)]
    rep = edap(preds, gts, tolerances=[30])
    assert rep.ap[(ON, 30)] == rep.ap[(OFF, 30)] == rep.mean_ap == 0.5


def test_empty_ground_truth_errors():
    with pytest.raises(ValueError):
        edap(HAND_PREDS, [])


@pytest.mark.parametrize("tols", [[], [0, 5], [10, 5], [5, 5]])
def test_bad_tolerances(tols):
    with pytest.raises(ValueError):
        check_tolerances(tols)


def test_brute_force_examples():
    assert brute_force_ap(HAND_PREDS, HAND_GT, 30) == 0.5
    assert brute_force_ap(HAND_PREDS, HAND_GT, 5) == 0.0
    assert brute_force_ap([], HAND_GT, 30) == 0.0
    assert brute_force_ap([pred(100, 1.0), pred(500, 0.9)], HAND_GT, 1) == 1.0


# -- properties --------------------------------------------------------------


@st.composite
def instances(draw, max_gt=20, max_pred=50, n_series=2, distinct=False):
    sids = [f"s{i}" for i in range(draw(st.integers(1, n_series)))]
    n_gt = draw(st.integers(0, max_gt))
    n_pred = draw(st.integers(0, max_pred))
    steps = st.integers(0, 400)
    gts = [gt(draw(steps), sid=draw(st.sampled_from(sids))) for _ in range(n_gt)]
    if distinct:
        confs = draw(st.lists(st.floats(0, 1), min_size=n_pred, max_size=n_pred, unique=True))
    else:
        # a small pool of values forces plenty of confidence ties
        pool = st.sampled_from([0.1, 0.25, 0.5, 0.75, 0.9]) | st.floats(0, 1)
        confs = [draw(pool) for _ in range(n_pred)]
    preds = [pred(draw(steps), c, sid=draw(st.sampled_from(sids))) for c in confs]
    return preds, gts


def pipeline_ap(preds, gts, tol):
    if not gts:
        return None
    return edap(preds, gts, tolerances=[tol]).ap[(ON, tol)]


tolerance = st.integers(1, 60)


@settings(max_examples=300, deadline=None)
@given(instances(), tolerance)
def test_matches_brute_force(inst, tol):
    preds, gts = inst
    a, b = pipeline_ap(preds, gts, tol), brute_force_ap(preds, gts, tol)
    assert (a is None) == (b is None)
    if a is not None:
        assert abs(a - b) <= 1e-9


@settings(max_examples=150, deadline=None)
@given(instances(), tolerance, st.sampled_from([lambda c: c**3, lambda c: 2 * c + 1, math.exp, math.sqrt]))
def test_rank_invariance(inst, tol, f):
    preds, gts = inst
    assume(gts)
    moved = [ScoredEvent(p.series_id, p.event, p.step, f(p.confidence)) for p in preds]
    # a transform that merges distinct confidences through rounding is not strictly increasing
    assume(len({p.confidence for p in preds}) == len({p.confidence for p in moved}))
    assert pipeline_ap(preds, gts, tol) == pipeline_ap(moved, gts, tol)


@settings(max_examples=150, deadline=None)
@given(instances(distinct=True), tolerance, st.randoms(use_true_random=False))
def test_input_order_invariance(inst, tol, rnd):
    preds, gts = inst
    assume(gts)
    shuffled = preds[:]
    rnd.shuffle(shuffled)
    assert pipeline_ap(preds, gts, tol) == pipeline_ap(shuffled, gts, tol)


@settings(max_examples=300, deadline=None)
@given(instances(), tolerance, tolerance)
def test_monotone_in_tolerance(inst, t1, t2):
    preds, gts = inst
    assume(gts)
    lo, hi = sorted((t1, t2))
    assert pipeline_ap(preds, gts, lo) <= pipeline_ap(preds, gts, hi) + 1e-12


@settings(max_examples=150, deadline=None)
@given(instances(), tolerance, st.integers(0, 400))
def test_bounds_and_suffix_only(inst, tol, step):
    preds, gts = inst
    assume(gts)
    ap = pipeline_ap(preds, gts, tol)
    assert 0.0 <= ap <= 1.0
    low = min((p.confidence for p in preds), default=1.0) / 2
    assume(all(low < p.confidence for p in preds))
    before = match_events(preds, gts, tol)
    after = match_events(preds + [pred(step, low)], gts, tol)
    assert np.array_equal(after.flags[: len(before.flags)], before.flags)
